// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "camnoise/realnoise.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "camnoise/binary_io.hpp"
#include "camnoise/image_io.hpp"
#include "camnoise/kv_text.hpp"
#include "camnoise/parallel.hpp"
#include "camnoise/rng.hpp"

namespace camnoise {

namespace {

std::string fit_text(const FittedGaussian& f) {
  return "(mu=" + format_exact(f.mu) + ", sigma=" + format_exact(f.sigma) + ")";
}

struct Moments {
  double total = 0.0, mean = 0.0, var = 0.0;
};

Moments moments(const Histogram& hist) {
  Moments m;
  for (const auto& [bin, count] : hist) {
    m.total += count;
    m.mean += count * static_cast<double>(bin);
  }
  if (m.total <= 0.0) return m;
  m.mean /= m.total;
  for (const auto& [bin, count] : hist) m.var += count * (bin - m.mean) * (bin - m.mean);
  m.var /= m.total;
  return m;
}

}  // namespace

NegativeVarianceError::NegativeVarianceError(FittedGaussian dcsn_fit, FittedGaussian rn_fit)
    : std::domain_error("dark-frame sigma below bias-frame sigma: dcsn " + fit_text(dcsn_fit) + ", rn " +
                        fit_text(rn_fit)),
      dcsn(dcsn_fit),
      rn(rn_fit) {}

Histogram build_histogram(const Image& image) {
  Histogram hist;
  for (float v : image.values()) hist[std::lround(v)] += 1.0;
  return hist;
}

long histogram_mode(const Histogram& hist) {
  long best = 0;
  double best_count = 0.0;
  for (const auto& [bin, count] : hist) {
    if (bin <= 0) continue;
    if (count > best_count) {
      best = bin;
      best_count = count;
    }
  }
  if (best_count <= 0.0) throw DegenerateDistributionError("no populated histogram bin above zero");
  return best;
}

Histogram fix_histogram(const Histogram& hist, long x_max) {
  Histogram fixed = hist;
  for (const auto& [bin, count] : hist)
    if (bin >= 2 * x_max) fixed[2 * x_max - bin] = count;
  return fixed;
}

FittedGaussian fit_normal(const Histogram& hist) {
  const Moments m = moments(hist);
  if (m.total <= 0.0) throw DegenerateDistributionError("empty histogram");
  long occupied = 0;
  for (const auto& [bin, count] : hist) occupied += count > 0.0;
  if (occupied <= 1) return {m.mean, 0.0};

  // Dense grid between the extreme bins; absent bins count as zero.
  const long lo = hist.begin()->first, hi = hist.rbegin()->first;
  const std::size_t n = static_cast<std::size_t>(hi - lo + 1);
  Eigen::VectorXd x(n), y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long bin = lo + static_cast<long>(i);
    auto it = hist.find(bin);
    x[i] = static_cast<double>(bin);
    y[i] = it == hist.end() ? 0.0 : it->second;
    w[i] = 1.0 / std::max(1.0, y[i]);  // Poisson variance of a bin count
  }

  // Parameters: amplitude, mean, log sigma.
  double sigma0 = std::sqrt(std::max(m.var, 1e-6));
  Eigen::Vector3d p(m.total / (std::sqrt(2.0 * M_PI) * sigma0), m.mean, std::log(sigma0));
  auto cost = [&](const Eigen::Vector3d& q) {
    const double s = std::exp(q[2]);
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - q[0] * std::exp(-0.5 * std::pow((x[i] - q[1]) / s, 2));
      c += w[i] * r * r;
    }
    return c;
  };

  double lambda = 1e-3;
  double current = cost(p);
  for (int iter = 0; iter < 200; ++iter) {
    const double s = std::exp(p[2]);
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (x[i] - p[1]) / s;
      const double g = std::exp(-0.5 * z * z);
      const double model = p[0] * g;
      const double r = y[i] - model;
      const Eigen::Vector3d j(g, model * z / s, model * z * z);
      jtj += w[i] * j * j.transpose();
      jtr += w[i] * j * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 20 && !improved; ++attempt) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() *= (1.0 + lambda);
      const Eigen::Vector3d step = a.ldlt().solve(jtr);
      const Eigen::Vector3d candidate = p + step;
      const double c = cost(candidate);
      if (std::isfinite(c) && c < current) {
        const double rel = (current - c) / std::max(current, 1e-300);
        p = candidate;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < 1e-12) iter = 200;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return {p[1], std::exp(p[2])};
}

FittedGaussian fix_noise_distribution(const Image& image) {
  const Histogram hist = build_histogram(image);
  const long x_max = histogram_mode(hist);
  return fit_normal(fix_histogram(hist, x_max));
}

FittedGaussian rectify_dcsn(const FittedGaussian& dcsn, const FittedGaussian& rn) {
  if (dcsn.sigma < rn.sigma) throw NegativeVarianceError(dcsn, rn);
  return {dcsn.mu - rn.mu, std::sqrt(dcsn.sigma * dcsn.sigma - rn.sigma * rn.sigma)};
}

Image resample_noise_image(const FittedGaussian& fit, int width, int height, std::uint64_t seed) {
  if (!(fit.sigma >= 0.0)) throw std::domain_error("fit sigma must be non-negative");
  Rng rng(seed);
  Image img(width, height);
  for (float& v : img.values()) v = static_cast<float>(rng.normal(fit.mu, fit.sigma));
  return img;
}

std::vector<Image> correct_fpn(const std::vector<Image>& images, int s_fpn) {
  if (s_fpn < 1) throw std::domain_error("s_fpn must be positive");
  if (images.size() <= static_cast<std::size_t>(s_fpn))
    throw std::domain_error("FPN correction needs more than " + std::to_string(s_fpn) + " images, got " +
                            std::to_string(images.size()));
  const int w = images.front().width(), h = images.front().height();
  for (const auto& img : images)
    if (img.width() != w || img.height() != h) throw std::domain_error("FPN images differ in shape");

  std::vector<double> fpn(images.front().size(), 0.0);
  for (int k = 0; k < s_fpn; ++k) {
    auto v = images[k].values();
    for (std::size_t i = 0; i < fpn.size(); ++i) fpn[i] += v[i];
  }
  for (double& f : fpn) f /= s_fpn;

  std::vector<Image> out;
  out.reserve(images.size() - s_fpn);
  for (std::size_t k = s_fpn; k < images.size(); ++k) {
    Image img = images[k];
    auto v = img.values();
    for (std::size_t i = 0; i < fpn.size(); ++i) v[i] = static_cast<float>(v[i] - fpn[i]);
    out.push_back(std::move(img));
  }
  return out;
}

void validate_session(const NoiseSession& s) {
  if (s.pairs.empty()) throw std::domain_error("session has no frame pairs");
  if (s.bit_depth < 8 || s.bit_depth > 16) throw std::domain_error("session bit depth must be 8..16");
  const auto& gain = field_info(MetaField::CameraGain);
  if (s.camera_gain < gain.min || s.camera_gain > gain.max) throw std::domain_error("session camera_gain out of range");
  const auto& exposure = field_info(MetaField::ExposureTime);
  const int w = s.pairs.front().rn.width(), h = s.pairs.front().rn.height();
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    const auto& p = s.pairs[i];
    if (p.rn.width() != w || p.rn.height() != h || p.dcsn.width() != w || p.dcsn.height() != h)
      throw std::domain_error("pair " + std::to_string(i) + ": frame shape differs from pair 0");
    if (p.exposure_time < exposure.min || p.exposure_time > exposure.max)
      throw std::domain_error("pair " + std::to_string(i) + ": exposure_time out of range");
  }
}

ProcessedSession process_session(const NoiseSession& session, std::uint64_t seed, int s_fpn, int threads) {
  validate_session(session);
  const std::size_t n = session.pairs.size();
  if (n <= static_cast<std::size_t>(s_fpn))
    throw std::domain_error("session has " + std::to_string(n) + " pairs; FPN correction needs more than " +
                            std::to_string(s_fpn));
  const int w = session.pairs.front().rn.width(), h = session.pairs.front().rn.height();

  ProcessedSession out;
  out.fits.resize(n);
  std::vector<Image> rn_fixed(n), dcsn_fixed(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& pair = session.pairs[i];
    try {
      PairFits& f = out.fits[i];
      f.rn = fix_noise_distribution(pair.rn);
      rn_fixed[i] = resample_noise_image(f.rn, w, h, derive_seed(seed, 2 * i));
      f.dcsn_raw = fix_noise_distribution(pair.dcsn);
      f.dcsn = rectify_dcsn(f.dcsn_raw, f.rn);
      dcsn_fixed[i] = resample_noise_image(f.dcsn, w, h, derive_seed(seed, 2 * i + 1));
    } catch (const std::domain_error& e) {
      throw std::domain_error("pair " + std::to_string(i) + ": " + e.what());
    }
  });
  out.rn = correct_fpn(rn_fixed, s_fpn);
  out.dcsn = correct_fpn(dcsn_fixed, s_fpn);
  return out;
}

FittedGaussian to_8bit(const FittedGaussian& fit, int bit_depth) {
  const double div = std::ldexp(1.0, bit_depth - 8);
  return {fit.mu / div, fit.sigma / div};
}

NoiseSession read_session(const std::filesystem::path& dir) {
  const KvText kv = KvText::read(dir / "session.txt");
  NoiseSession s;
  s.camera_gain = kv.get_double("camera_gain");
  s.bit_depth = static_cast<int>(kv.get_int("bit_depth"));
  s.meta = overlay_metadata(kv, max_metadata(), "meta.");
  s.meta.camera_gain = s.camera_gain;
  const long long count = kv.get_int("pair_count");
  if (count < 0) throw KvParseError("negative pair_count");
  for (long long i = 0; i < count; ++i) {
    const std::string key = "pair." + std::to_string(i) + ".";
    NoisePair p;
    p.exposure_time = kv.get_double(key + "exposure_time");
    p.rn = read_image(dir / kv.get(key + "rn")).image;
    p.dcsn = read_image(dir / kv.get(key + "dcsn")).image;
    s.pairs.push_back(std::move(p));
  }
  validate_session(s);
  return s;
}

void write_session(const NoiseSession& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  KvText kv;
  kv.set("format_version", 1LL);
  kv.set("camera_gain", s.camera_gain);
  kv.set("bit_depth", static_cast<long long>(s.bit_depth));
  kv.set("pair_count", static_cast<long long>(s.pairs.size()));
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    char rn[32], dc[32];
    std::snprintf(rn, sizeof(rn), "rn_%04zu.pgm", i);
    std::snprintf(dc, sizeof(dc), "dcsn_%04zu.pgm", i);
    const std::string key = "pair." + std::to_string(i) + ".";
    kv.set(key + "exposure_time", s.pairs[i].exposure_time);
    kv.set(key + "rn", std::string(rn));
    kv.set(key + "dcsn", std::string(dc));
    write_pgm(dir / rn, s.pairs[i].rn, 16);
    write_pgm(dir / dc, s.pairs[i].dcsn, 16);
  }
  write_metadata(kv, s.meta, "meta.");
  kv.write(dir / "session.txt");
}

void write_processed(const ProcessedSession& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const std::vector<Image>& images, const char* prefix) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[40];
      std::snprintf(name, sizeof(name), "%s_%04zu.f32", prefix, i);
      std::ofstream out(dir / name, std::ios::binary);
      binio::put_f32(out, images[i].values());
      if (!out) throw std::runtime_error(std::string("write failed: ") + name);
    }
  };
  dump(p.rn, "rn");
  dump(p.dcsn, "dcsn");

  KvText info;
  info.set("format_version", 1LL);
  info.set("width", static_cast<long long>(p.rn.empty() ? 0 : p.rn.front().width()));
  info.set("height", static_cast<long long>(p.rn.empty() ? 0 : p.rn.front().height()));
  info.set("frame_count", static_cast<long long>(p.rn.size()));
  info.write(dir / "output.txt");

  std::ofstream csv(dir / "fits.csv");
  csv << "pair,rn_mu,rn_sigma,dcsn_raw_mu,dcsn_raw_sigma,dcsn_mu,dcsn_sigma\n";
  for (std::size_t i = 0; i < p.fits.size(); ++i) {
    const auto& f = p.fits[i];
    csv << i << ',' << format_exact(f.rn.mu) << ',' << format_exact(f.rn.sigma) << ',' << format_exact(f.dcsn_raw.mu)
        << ',' << format_exact(f.dcsn_raw.sigma) << ',' << format_exact(f.dcsn.mu) << ',' << format_exact(f.dcsn.sigma)
        << '\n';
  }
}

NoiseSession synthesize_session(const SessionSpec& spec, std::uint64_t seed) {
  NoiseSession s;
  s.camera_gain = spec.camera_gain;
  s.bit_depth = spec.bit_depth;
  s.meta = max_metadata();
  s.meta.camera_gain = spec.camera_gain;
  const float maxval = static_cast<float>((1 << spec.bit_depth) - 1);

  Rng pattern_rng(derive_seed(seed, 0));
  std::vector<float> fpn(static_cast<std::size_t>(spec.width) * spec.height);
  for (float& f : fpn) f = static_cast<float>(pattern_rng.normal(0.0, spec.fpn_sigma));

  auto frame = [&](Rng& rng, bool dark) {
    Image img(spec.width, spec.height);
    auto v = img.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double x = rng.normal(spec.rn_mu, spec.rn_sigma) + fpn[i];
      if (dark) x += rng.normal(spec.dcsn_mu, spec.dcsn_sigma);
      v[i] = std::clamp(std::nearbyint(static_cast<float>(x)), 0.0f, maxval);
    }
    return img;
  };
  for (int i = 0; i < spec.pairs; ++i) {
    Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(i)));
    NoisePair p;
    p.rn = frame(rng, false);
    p.dcsn = frame(rng, true);
    p.exposure_time = rng.uniform(0.001, 0.2);
    s.pairs.push_back(std::move(p));
  }
  return s;
}

}  // namespace camnoise
