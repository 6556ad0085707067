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

#include "camnoise/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "camnoise/hash.hpp"
#include "camnoise/kv_text.hpp"
#include "camnoise/rng.hpp"

namespace camnoise {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> column(std::span<const NoiseLevels> v, double NoiseLevels::*field) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& l : v) out.push_back(l.*field);
  return out;
}

void write_row(std::ostream& out, std::string_view name, const SourceMetrics& m, std::size_t count) {
  out << name << ',' << format_exact(m.bias) << ',' << format_exact(m.std) << ',' << format_exact(m.rms) << ','
      << count << '\n';
}

}  // namespace

SourceMetrics compute_source_metrics(std::span<const double> est, std::span<const double> truth) {
  if (est.size() != truth.size())
    throw std::domain_error("metrics: " + std::to_string(est.size()) + " estimates vs " +
                            std::to_string(truth.size()) + " truths");
  if (est.size() < 2) throw std::domain_error("metrics need at least two samples");
  SourceMetrics m;
  std::vector<double> err(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) err[i] = est[i] - truth[i];
  const double mean_err = mean_of(err);
  m.bias = std::abs(mean_err);
  double ss = 0.0;
  for (double e : err) ss += (e - mean_err) * (e - mean_err);
  m.std = std::sqrt(ss / static_cast<double>(err.size()));
  m.rms = std::sqrt(m.bias * m.bias + m.std * m.std);
  return m;
}

MetricReport compute_metrics(std::span<const NoiseLevels> est, std::span<const NoiseLevels> truth) {
  if (est.size() != truth.size())
    throw std::domain_error("metrics: " + std::to_string(est.size()) + " estimates vs " +
                            std::to_string(truth.size()) + " truths");
  MetricReport r;
  r.count = est.size();
  r.pn = compute_source_metrics(column(est, &NoiseLevels::sigma_pn), column(truth, &NoiseLevels::sigma_pn));
  r.dcsn = compute_source_metrics(column(est, &NoiseLevels::sigma_dcsn), column(truth, &NoiseLevels::sigma_dcsn));
  r.rn = compute_source_metrics(column(est, &NoiseLevels::sigma_rn), column(truth, &NoiseLevels::sigma_rn));
  r.xi = compute_source_metrics(column(est, &NoiseLevels::xi), column(truth, &NoiseLevels::xi));
  r.total = compute_source_metrics(column(est, &NoiseLevels::sigma_total), column(truth, &NoiseLevels::sigma_total));
  return r;
}

MetricReport evaluate_model(const Model& model, std::span<const TrainingRecord> records, int threads) {
  std::vector<Patch> patches;
  std::vector<CameraMetadata> metas;
  std::vector<NoiseLevels> truths;
  const bool total_only = !model.variant().has_branches();
  for (const auto& r : records) {
    patches.push_back(r.noisy);
    metas.push_back(r.meta_fed);
    truths.push_back(total_only ? NoiseLevels{0, 0, 0, 0, r.truth.source_total()} : r.truth);
  }
  const auto estimates = estimate_batch(model, patches, metas, threads);
  std::vector<NoiseLevels> levels;
  for (const auto& e : estimates) levels.push_back(e.levels);
  MetricReport report = compute_metrics(levels, truths);
  report.total_only = total_only;
  return report;
}

double baseline_block_estimate(const Patch& patch) {
  const int w = patch.width(), h = patch.height();
  if (w < 16 || h < 16) throw std::domain_error("baseline estimate needs a patch of at least 16x16");
  // Residual x - box3(x) of i.i.d. noise has variance (8/9) sigma^2.
  const double residual_scale = 1.0 / std::sqrt(8.0 / 9.0);

  struct Block {
    double texture;
    int x0, y0;
  };
  std::vector<Block> blocks;
  for (int y0 = 1; y0 + kBaselineBlock <= h - 1; y0 += kBaselineBlock)
    for (int x0 = 1; x0 + kBaselineBlock <= w - 1; x0 += kBaselineBlock) {
      double s = 0.0, ss = 0.0;
      for (int y = y0; y < y0 + kBaselineBlock; ++y)
        for (int x = x0; x < x0 + kBaselineBlock; ++x) {
          double m = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) m += patch.at(x + dx, y + dy);
          m /= 9.0;
          s += m;
          ss += m * m;
        }
      const double n = kBaselineBlock * kBaselineBlock;
      blocks.push_back({ss / n - (s / n) * (s / n), x0, y0});
    }
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.texture < b.texture; });
  const std::size_t keep = std::max<std::size_t>(1, blocks.size() / 4);

  std::vector<double> residuals;
  for (std::size_t b = 0; b < keep; ++b)
    for (int y = blocks[b].y0; y < blocks[b].y0 + kBaselineBlock; ++y)
      for (int x = blocks[b].x0; x < blocks[b].x0 + kBaselineBlock; ++x) {
        double m = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) m += patch.at(x + dx, y + dy);
        residuals.push_back((patch.at(x, y) - m / 9.0) * residual_scale);
      }
  const double med = median_inplace(residuals);
  for (double& r : residuals) r = std::abs(r - med);
  return 1.4826 * median_inplace(residuals);
}

double added_noise_xi(double sigma_model, double sigma_n) {
  return sigma_model - std::sqrt(sigma_model * sigma_model + sigma_n * sigma_n);
}

std::vector<TrainingRecord> scenario_add_gaussian(std::span<const TrainingRecord> records, double sigma_n,
                                                  std::uint64_t seed) {
  if (!(sigma_n >= 0.0)) throw std::domain_error("added noise sigma must be non-negative");
  std::vector<TrainingRecord> out(records.begin(), records.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    if (r.truth.xi != 0.0)
      throw std::domain_error("record " + std::to_string(i) + ": added-noise scenario needs xi = 0 on input");
    Rng rng(derive_seed(seed, i));
    for (float& v : r.noisy.values()) v = static_cast<float>(v + rng.normal(0.0, sigma_n));
    quantize_8bit(r.noisy);
    const double model = r.truth.source_total();
    r.truth = NoiseLevels::compose(r.truth.sigma_pn, r.truth.sigma_dcsn, r.truth.sigma_rn, added_noise_xi(model, sigma_n));
  }
  return out;
}

std::vector<TrainingRecord> scenario_double_param(std::span<const TrainingRecord> records, std::string_view param) {
  const auto field = field_from_name(param);
  if (!field || *field == MetaField::SensorType)
    throw std::domain_error("cannot double metadata parameter '" + std::string(param) + "'");
  std::vector<TrainingRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    set_field(r.meta_fed, *field, 2.0 * get_field(r.meta_fed, *field));
    const double fed_total = predict_sigmas(r.meta_fed, r.mean_intensity).sigma_total;
    const NoiseLevels used = predict_sigmas(r.meta_used, r.mean_intensity);
    r.truth = NoiseLevels::compose(used.sigma_pn, used.sigma_dcsn, used.sigma_rn, fed_total - used.sigma_total);
  }
  return out;
}

CameraMetadata sensitivity_fixed_metadata(std::string_view param) {
  return max_metadata(param == "thermal_white_noise" ? SensorType::CCD : SensorType::CMOS);
}

std::vector<SensitivityRow> compare_sensitivity(const Model* model, int points, double intensity, int threads) {
  std::vector<SensitivityRow> rows;
  std::vector<Patch> patches;
  std::vector<CameraMetadata> metas;
  const int size = model ? model->variant().patch_size : 0;
  for (std::string_view param : sweep_parameters()) {
    const CameraMetadata fixed = sensitivity_fixed_metadata(param);
    const auto sweep = sensitivity_sweep(param, points, fixed, intensity);
    const auto field = field_from_name(param);
    for (const auto& p : sweep) {
      SensitivityRow row;
      row.param = std::string(param);
      row.value = p.value;
      row.physical = p.observed_total;
      row.physical_model = p.levels.sigma_total;
      row.estimated = std::numeric_limits<double>::quiet_NaN();
      row.deviation = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
      if (model) {
        CameraMetadata meta = fixed;
        if (field) set_field(meta, *field, p.value);
        patches.emplace_back(size, size, static_cast<float>(field ? intensity : p.value));
        metas.push_back(meta);
      }
    }
  }
  if (model) {
    const auto est = estimate_batch(*model, patches, metas, threads);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& l = est[i].levels;
      rows[i].estimated = est[i].total_only ? l.sigma_total : l.source_total();
      rows[i].deviation = std::abs(rows[i].estimated - rows[i].physical);
    }
  }
  return rows;
}

BenchResult runtime_bench(const Model& model, std::size_t n_patches, int threads, int repetitions,
                          std::uint64_t seed) {
  if (n_patches == 0 || repetitions < 1) throw std::domain_error("benchmark needs patches and repetitions");
  const int size = model.variant().patch_size;
  const auto clean = synthetic_corpus(n_patches, size, seed);
  std::vector<Patch> patches;
  std::vector<CameraMetadata> metas;
  for (std::size_t i = 0; i < n_patches; ++i) {
    const CameraMetadata meta = sample_metadata(derive_seed(seed, 2 * i));
    patches.push_back(corrupt_patch(clean[i], meta, derive_seed(seed, 2 * i + 1)).noisy);
    metas.push_back(meta);
  }
  std::span<const CameraMetadata> meta_span = model.variant().uses_metadata() ? std::span<const CameraMetadata>(metas)
                                                                             : std::span<const CameraMetadata>();
  const std::size_t warm = std::min<std::size_t>(kBenchWarmup, n_patches);
  estimate_batch(model, std::span<const Patch>(patches).first(warm),
                 meta_span.empty() ? meta_span : meta_span.first(warm), threads);

  BenchResult r;
  r.threads = threads;
  r.patches = n_patches;
  std::vector<Estimate> last;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    last = estimate_batch(model, patches, meta_span, threads);
    const auto t1 = std::chrono::steady_clock::now();
    r.repetition_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                              static_cast<double>(n_patches));
  }
  r.mean_ms = mean_of(r.repetition_ms);
  double ss = 0.0;
  for (double t : r.repetition_ms) ss += (t - r.mean_ms) * (t - r.mean_ms);
  r.std_ms = std::sqrt(ss / static_cast<double>(r.repetition_ms.size()));
  std::uint64_t hash = kFnvOffset;
  for (const auto& e : last)
    for (double v : e.raw)
      hash = fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(&v), sizeof v), hash);
  r.output_hash = hash;
  return r;
}

void write_metrics_csv(std::ostream& out, const MetricReport& report, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n';
  out << "source,bias,std,rms,count\n";
  if (!report.total_only) {
    write_row(out, "pn", report.pn, report.count);
    write_row(out, "dcsn", report.dcsn, report.count);
    write_row(out, "rn", report.rn, report.count);
    write_row(out, "xi", report.xi, report.count);
  }
  write_row(out, "total", report.total, report.count);
}

void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n';
  out << "param,value,physical,physical_unclipped,estimated,deviation\n";
  for (const auto& r : rows) {
    out << r.param << ',' << format_exact(r.value) << ',' << format_exact(r.physical) << ','
        << format_exact(r.physical_model) << ',';
    if (std::isnan(r.estimated))
      out << ",\n";
    else
      out << format_exact(r.estimated) << ',' << format_exact(r.deviation) << '\n';
  }
}

void write_bench_csv(std::ostream& out, const BenchResult& r, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n';
  out << "patches,threads,repetitions,mean_ms_per_patch,std_ms_per_patch\n";
  out << r.patches << ',' << r.threads << ',' << r.repetition_ms.size() << ',' << format_exact(r.mean_ms) << ','
      << format_exact(r.std_ms) << '\n';
}

}  // namespace camnoise
