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

#include "camnoise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "camnoise/binary_io.hpp"
#include "camnoise/image_io.hpp"
#include "camnoise/kv_text.hpp"
#include "camnoise/parallel.hpp"
#include "camnoise/rng.hpp"

namespace camnoise {

namespace {

// Substreams of a record seed.
enum : std::uint64_t { kStreamAugment = 0, kStreamMeta = 1, kStreamMismatch = 2, kStreamCorrupt = 3 };

constexpr double kTruthRelTol = 1e-9;

bool close(double a, double b) { return std::abs(a - b) <= kTruthRelTol * std::max(1.0, std::abs(b)); }

std::string record_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

[[noreturn]] void invariant(std::size_t index, const std::string& what) {
  throw DatasetError(DatasetError::Kind::InvariantViolation, "record " + std::to_string(index) + ": " + what);
}

void write_levels(KvText& kv, const NoiseLevels& l, const std::string& prefix) {
  kv.set(prefix + "sigma_pn", l.sigma_pn);
  kv.set(prefix + "sigma_dcsn", l.sigma_dcsn);
  kv.set(prefix + "sigma_rn", l.sigma_rn);
  kv.set(prefix + "xi", l.xi);
  kv.set(prefix + "sigma_total", l.sigma_total);
}

NoiseLevels read_levels(const KvText& kv, const std::string& prefix) {
  NoiseLevels l;
  l.sigma_pn = kv.get_double(prefix + "sigma_pn");
  l.sigma_dcsn = kv.get_double(prefix + "sigma_dcsn");
  l.sigma_rn = kv.get_double(prefix + "sigma_rn");
  l.xi = kv.get_double(prefix + "xi");
  l.sigma_total = kv.get_double(prefix + "sigma_total");
  return l;
}

}  // namespace

CameraMetadata sample_metadata(std::uint64_t seed) {
  Rng rng(seed);
  CameraMetadata m;
  for (const auto& info : kMetaFields) {
    if (info.field == MetaField::SensorType)
      m.sensor_type = rng.bernoulli(0.5) ? SensorType::CMOS : SensorType::CCD;
    else
      set_field(m, info.field, rng.uniform(info.min, info.max));
  }
  return m;
}

double draw_intensity_offset(std::uint64_t seed) {
  Rng rng(seed);
  return rng.uniform(-kIntensityShift, kIntensityShift);
}

Patch augment_intensity(const Patch& patch, std::uint64_t seed) {
  const auto offset = static_cast<float>(draw_intensity_offset(seed));
  Patch out = patch;
  for (float& v : out.values()) v += offset;
  clip(out);
  return out;
}

TrainingRecord make_record(const Patch& clean, std::uint64_t seed, double mismatch_prob) {
  if (!(mismatch_prob >= 0.0 && mismatch_prob <= 1.0))
    throw std::domain_error("mismatch_prob must lie in [0, 1]");
  validate_patch(clean);

  TrainingRecord r;
  r.clean = augment_intensity(clean, derive_seed(seed, kStreamAugment));
  r.meta_fed = sample_metadata(derive_seed(seed, kStreamMeta));
  r.meta_used = r.meta_fed;
  Rng mismatch(derive_seed(seed, kStreamMismatch));
  if (mismatch.bernoulli(mismatch_prob)) {
    const auto& gain = field_info(MetaField::CameraGain);
    r.meta_used.camera_gain = mismatch.uniform(gain.min, gain.max);
  }
  auto corrupted = corrupt_patch(r.clean, r.meta_used, derive_seed(seed, kStreamCorrupt));
  r.noisy = std::move(corrupted.noisy);
  r.mean_intensity = r.clean.mean();

  const NoiseLevels& used = corrupted.truth;
  const double model_total = r.mismatched() ? predict_sigmas(r.meta_fed, r.mean_intensity).sigma_total
                                            : used.sigma_total;
  r.truth = NoiseLevels::compose(used.sigma_pn, used.sigma_dcsn, used.sigma_rn, model_total - used.sigma_total);
  return r;
}

void validate_record(const TrainingRecord& r, std::size_t index) {
  if (r.clean.empty() || r.clean.width() != r.noisy.width() || r.clean.height() != r.noisy.height())
    invariant(index, "clean/noisy shape mismatch");
  try {
    validate_patch(r.clean);
    validate_patch(r.noisy);
    validate_ranges(r.meta_fed);
    validate_ranges(r.meta_used);
  } catch (const std::domain_error& e) {
    invariant(index, e.what());
  }
  if (!satisfies_composition(r.truth, kTruthRelTol)) invariant(index, "truth violates sigma composition");
  if (!(r.mean_intensity >= 0.0 && r.mean_intensity <= kMaxDn)) invariant(index, "mean_intensity out of range");

  const NoiseLevels used = predict_sigmas(r.meta_used, r.mean_intensity);
  if (!close(r.truth.sigma_pn, used.sigma_pn) || !close(r.truth.sigma_dcsn, used.sigma_dcsn) ||
      !close(r.truth.sigma_rn, used.sigma_rn))
    invariant(index, "per-source truth does not match meta_used");

  if (!r.mismatched()) {
    if (r.truth.xi != 0.0) invariant(index, "xi must be 0 when fed and used metadata agree");
    return;
  }
  CameraMetadata gain_only = r.meta_fed;
  gain_only.camera_gain = r.meta_used.camera_gain;
  if (!(gain_only == r.meta_used)) invariant(index, "fed and used metadata differ beyond camera_gain");
  const double expected_xi = predict_sigmas(r.meta_fed, r.mean_intensity).sigma_total - used.sigma_total;
  if (!close(r.truth.xi, expected_xi)) invariant(index, "xi does not equal total(fed) - total(used)");
}

Dataset generate_dataset(const std::vector<Patch>& corpus, std::size_t count, double mismatch_prob,
                         std::uint64_t seed, int threads) {
  if (corpus.empty()) throw std::domain_error("empty clean corpus");
  const int w = corpus.front().width(), h = corpus.front().height();
  for (const auto& p : corpus)
    if (p.width() != w || p.height() != h) throw std::domain_error("clean corpus patches differ in size");
  Dataset ds;
  ds.info = {w, h, seed, mismatch_prob};
  ds.records.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    ds.records[i] = make_record(corpus[i % corpus.size()], derive_seed(seed, i), mismatch_prob);
  });
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "records", ec);
  if (ec) throw DatasetError(DatasetError::Kind::Io, "cannot create " + dir.string() + ": " + ec.message());

  KvText manifest;
  manifest.set("format_version", static_cast<long long>(kDatasetFormatVersion));
  manifest.set("patch_width", static_cast<long long>(ds.info.patch_width));
  manifest.set("patch_height", static_cast<long long>(ds.info.patch_height));
  manifest.set("record_count", static_cast<long long>(ds.records.size()));
  manifest.set("generator_seed", std::to_string(ds.info.generator_seed));
  manifest.set("mismatch_prob", ds.info.mismatch_prob);
  manifest.write(dir / "manifest.txt");

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.clean.width() != ds.info.patch_width || r.clean.height() != ds.info.patch_height)
      throw DatasetError(DatasetError::Kind::Malformed, "record " + std::to_string(i) + " has wrong patch size");
    const std::string stem = record_stem(i);
    {
      std::ofstream out(dir / "records" / (stem + ".bin"), std::ios::binary);
      binio::put_f32(out, r.clean.values());
      binio::put_f32(out, r.noisy.values());
      if (!out) throw DatasetError(DatasetError::Kind::Io, "write failed for record " + std::to_string(i));
    }
    KvText side;
    side.set("index", static_cast<long long>(i));
    side.set("mean_intensity", r.mean_intensity);
    write_levels(side, r.truth, "truth.");
    write_metadata(side, r.meta_fed, "fed.");
    write_metadata(side, r.meta_used, "used.");
    side.write(dir / "records" / (stem + ".txt"));
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "manifest.txt"))
    throw DatasetError(DatasetError::Kind::Io, "no manifest.txt in " + dir.string());
  Dataset ds;
  std::size_t count = 0;
  try {
    const KvText manifest = KvText::read(dir / "manifest.txt");
    const long long version = manifest.get_int("format_version");
    if (version != kDatasetFormatVersion)
      throw DatasetError(DatasetError::Kind::VersionMismatch,
                         "dataset format version " + std::to_string(version) + ", expected " +
                             std::to_string(kDatasetFormatVersion));
    ds.info.patch_width = static_cast<int>(manifest.get_int("patch_width"));
    ds.info.patch_height = static_cast<int>(manifest.get_int("patch_height"));
    ds.info.generator_seed = std::stoull(manifest.get("generator_seed"));
    if (manifest.contains("mismatch_prob")) ds.info.mismatch_prob = manifest.get_double("mismatch_prob");
    const long long n = manifest.get_int("record_count");
    if (n < 0 || ds.info.patch_width <= 0 || ds.info.patch_height <= 0)
      throw DatasetError(DatasetError::Kind::Malformed, "manifest has invalid sizes");
    count = static_cast<std::size_t>(n);
  } catch (const KvParseError& e) {
    throw DatasetError(DatasetError::Kind::Malformed, std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw DatasetError(DatasetError::Kind::Malformed, "manifest: bad generator_seed");
  }

  const std::size_t pixels = static_cast<std::size_t>(ds.info.patch_width) * ds.info.patch_height;
  ds.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string stem = record_stem(i);
    const fs::path bin = dir / "records" / (stem + ".bin");
    const fs::path txt = dir / "records" / (stem + ".txt");
    if (!fs::exists(bin) || !fs::exists(txt))
      throw DatasetError(DatasetError::Kind::Truncated, "record " + std::to_string(i) + " is missing");
    if (fs::file_size(bin) != 2 * pixels * sizeof(float))
      throw DatasetError(DatasetError::Kind::Truncated,
                         "record " + std::to_string(i) + ": pixel file has " + std::to_string(fs::file_size(bin)) +
                             " bytes, expected " + std::to_string(2 * pixels * sizeof(float)));
    auto& r = ds.records[i];
    std::vector<float> clean(pixels), noisy(pixels);
    std::ifstream in(bin, std::ios::binary);
    if (!binio::get_f32(in, clean) || !binio::get_f32(in, noisy))
      throw DatasetError(DatasetError::Kind::Truncated, "record " + std::to_string(i) + ": short read");
    r.clean = Patch(ds.info.patch_width, ds.info.patch_height, std::move(clean));
    r.noisy = Patch(ds.info.patch_width, ds.info.patch_height, std::move(noisy));
    try {
      const KvText side = KvText::read(txt);
      r.mean_intensity = side.get_double("mean_intensity");
      r.truth = read_levels(side, "truth.");
      r.meta_fed = read_metadata(side, "fed.");
      r.meta_used = read_metadata(side, "used.");
    } catch (const KvParseError& e) {
      invariant(i, std::string("sidecar: ") + e.what());
    } catch (const std::domain_error& e) {
      invariant(i, std::string("sidecar: ") + e.what());
    }
    validate_record(r, i);
  }
  return ds;
}

std::vector<Patch> tile_image(const Image& image, int patch_size) {
  if (patch_size <= 0) throw std::domain_error("patch size must be positive");
  if (image.width() < patch_size || image.height() < patch_size)
    throw std::domain_error("image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                            " smaller than one " + std::to_string(patch_size) + " px tile");
  std::vector<Patch> tiles;
  const int nx = image.width() / patch_size, ny = image.height() / patch_size;
  tiles.reserve(static_cast<std::size_t>(nx) * ny);
  for (int ty = 0; ty < ny; ++ty)
    for (int tx = 0; tx < nx; ++tx) tiles.push_back(image.crop(tx * patch_size, ty * patch_size, patch_size, patch_size));
  return tiles;
}

Image synthesize_clean_image(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = std::max(width, height);
  const double base = rng.uniform(50.0, 200.0);
  const double gx = rng.uniform(-60.0, 60.0) / scale;
  const double gy = rng.uniform(-60.0, 60.0) / scale;
  const double wave_amp = rng.uniform(0.0, 15.0);
  const double wave_k = rng.uniform(0.5, 3.0) * 2.0 * std::numbers::pi / scale;
  const double wave_dir = rng.uniform(0.0, std::numbers::pi);

  struct Shape {
    bool ellipse;
    double cx, cy, rx, ry, level;
  };
  std::vector<Shape> shapes(static_cast<std::size_t>(rng.uniform(2.0, 6.0)));
  for (auto& s : shapes) {
    s.ellipse = rng.bernoulli(0.5);
    s.cx = rng.uniform(0.0, width);
    s.cy = rng.uniform(0.0, height);
    s.rx = rng.uniform(0.08, 0.35) * scale;
    s.ry = rng.uniform(0.08, 0.35) * scale;
    s.level = rng.uniform(-70.0, 70.0);
  }
  constexpr double kEdge = 1.5;  // px, logistic edge width

  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = base + gx * (x - width / 2.0) + gy * (y - height / 2.0) +
                 wave_amp * std::sin(wave_k * (x * std::cos(wave_dir) + y * std::sin(wave_dir)));
      for (const auto& s : shapes) {
        double d;  // signed distance proxy, negative inside
        if (s.ellipse) {
          const double nx = (x - s.cx) / s.rx, ny = (y - s.cy) / s.ry;
          d = (std::sqrt(nx * nx + ny * ny) - 1.0) * std::min(s.rx, s.ry);
        } else {
          d = std::max(std::abs(x - s.cx) - s.rx, std::abs(y - s.cy) - s.ry);
        }
        v += s.level / (1.0 + std::exp(d / kEdge));
      }
      img.at(x, y) = static_cast<float>(std::clamp(v, 25.0, 230.0));
    }
  }
  return img;
}

std::vector<Patch> synthetic_corpus(std::size_t count, int patch_size, std::uint64_t seed) {
  std::vector<Patch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthesize_clean_image(patch_size, patch_size, derive_seed(seed, i)));
  return out;
}

std::vector<Patch> load_clean_corpus(const std::filesystem::path& dir, int patch_size) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Patch> patches;
  for (const auto& f : files) {
    LoadedImage loaded = read_image(f);
    if (loaded.bit_depth > 8) {
      const float div = static_cast<float>(1 << (loaded.bit_depth - 8));
      for (float& v : loaded.image.values()) v /= div;
      clip(loaded.image);
    }
    if (loaded.image.width() < patch_size || loaded.image.height() < patch_size) continue;
    for (auto& p : tile_image(loaded.image, patch_size)) patches.push_back(std::move(p));
  }
  if (patches.empty()) throw std::domain_error("no usable .pgm/.png images in " + dir.string());
  return patches;
}

}  // namespace camnoise
