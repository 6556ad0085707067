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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camnoise/dataset.hpp"
#include "camnoise/estimator.hpp"
#include "camnoise/noise_model.hpp"

namespace camnoise {

struct SourceMetrics {
  double bias = 0.0;  // |mean(truth) - mean(estimate)|
  double std = 0.0;   // population std of estimate - truth
  double rms = 0.0;   // sqrt(bias^2 + std^2), the root-mean-square error
};

struct MetricReport {
  SourceMetrics pn, dcsn, rn, xi, total;
  std::size_t count = 0;
  bool total_only = false;
};

/// Throws std::domain_error for unequal lengths or fewer than two values.
SourceMetrics compute_source_metrics(std::span<const double> estimates, std::span<const double> truths);
MetricReport compute_metrics(std::span<const NoiseLevels> estimates, std::span<const NoiseLevels> truths);

/// Estimates every record's noisy patch (metadata from meta_fed) and scores it
/// against the record truth. DrneCust is scored on the source total.
MetricReport evaluate_model(const Model& model, std::span<const TrainingRecord> records, int threads = 1);

inline constexpr int kBaselineBlock = 8;

/// Model-free reference: residual of the patch against its 3x3 box filter,
/// rescaled to the per-pixel noise level, then MAD * 1.4826 over the quarter
/// of 8x8 blocks whose box-filtered content varies least.
double baseline_block_estimate(const Patch& patch);

/// sigma_model - sqrt(sigma_model^2 + sigma_n^2).
double added_noise_xi(double sigma_model, double sigma_n);

inline constexpr double kScenarioNoiseSigma = 5.0;

/// Adds N(0, sigma_n^2) to every noisy patch (rounded and clipped) and sets
/// truth.xi from added_noise_xi. Requires xi = 0 on input.
std::vector<TrainingRecord> scenario_add_gaussian(std::span<const TrainingRecord> records, double sigma_n,
                                                  std::uint64_t seed);

/// Doubles one metadata field in meta_fed (range checks deliberately skipped)
/// and recomputes truth.xi = total(meta_fed) - total(meta_used). Images and
/// per-source truth are unchanged.
std::vector<TrainingRecord> scenario_double_param(std::span<const TrainingRecord> records, std::string_view param);

inline constexpr int kSensitivityPoints = 10;
inline constexpr double kSensitivityIntensity = 128.0;

/// All fields at their maxima on a CMOS sensor; the thermal-noise row uses a
/// CCD sensor.
CameraMetadata sensitivity_fixed_metadata(std::string_view param);

struct SensitivityRow {
  std::string param;
  double value = 0.0;
  double physical = 0.0;         // observed (clipped) total of the noise model
  double physical_model = 0.0;   // unclipped sigma_total of the noise model
  double estimated = 0.0;        // model source total; NaN without a model
  double deviation = 0.0;        // |estimated - physical|; NaN without a model
};

/// Runs every sweep parameter through the noise model and, when `model` is
/// given, the estimator on uncorrupted uniform patches (xi left out of the
/// estimated total).
std::vector<SensitivityRow> compare_sensitivity(const Model* model, int points = kSensitivityPoints,
                                                double intensity = kSensitivityIntensity, int threads = 1);

struct BenchResult {
  double mean_ms = 0.0;  // per patch
  double std_ms = 0.0;   // across repetitions
  std::vector<double> repetition_ms;
  int threads = 1;
  std::size_t patches = 0;
  std::uint64_t output_hash = 0;  // hash of every estimate of the last repetition
};

inline constexpr int kBenchWarmup = 50;
inline constexpr int kBenchRepetitions = 5;

BenchResult runtime_bench(const Model& model, std::size_t n_patches = 1000, int threads = 1,
                          int repetitions = kBenchRepetitions, std::uint64_t seed = 1);

/// CSV writers: a "# config_hash=<hex>" comment line, a header row, then data.
void write_metrics_csv(std::ostream& out, const MetricReport& report, const std::string& config_hash);
void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows, const std::string& config_hash);
void write_bench_csv(std::ostream& out, const BenchResult& result, const std::string& config_hash);

}  // namespace camnoise
