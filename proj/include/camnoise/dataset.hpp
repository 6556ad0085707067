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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "camnoise/image.hpp"
#include "camnoise/metadata.hpp"
#include "camnoise/noise_model.hpp"

namespace camnoise {

/// One supervised example. `meta_fed` is what the estimator sees;
/// `meta_used` produced the noise in `noisy`. truth holds meta_used's
/// per-source sigmas and xi = total(meta_fed) - total(meta_used).
struct TrainingRecord {
  Patch clean;
  Patch noisy;
  CameraMetadata meta_fed;
  CameraMetadata meta_used;
  NoiseLevels truth;
  double mean_intensity = 0.0;  // clean mean at which truth was evaluated

  bool mismatched() const { return !(meta_fed == meta_used); }
  bool operator==(const TrainingRecord&) const = default;
};

inline constexpr double kIntensityShift = 20.0;
inline constexpr double kDefaultMismatchProb = 0.5;
inline constexpr int kDatasetFormatVersion = 1;

/// Each variable field uniform over its range (gain uniform in dB), sensor
/// type a fair coin, fixed fields at their defaults.
CameraMetadata sample_metadata(std::uint64_t seed);

/// Offset in [-20, 20] DN used by augment_intensity for this seed.
double draw_intensity_offset(std::uint64_t seed);

/// Adds one uniform offset in [-20, 20] DN to every pixel, then clips.
Patch augment_intensity(const Patch& patch, std::uint64_t seed);

/// Augments, samples metadata, optionally re-draws camera gain (probability
/// mismatch_prob) to build meta_used, then corrupts with meta_used.
TrainingRecord make_record(const Patch& clean, std::uint64_t seed, double mismatch_prob);

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { Io, VersionMismatch, Truncated, Malformed, InvariantViolation };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Throws DatasetError(InvariantViolation) naming `index`.
void validate_record(const TrainingRecord& record, std::size_t index);

struct DatasetInfo {
  int patch_width = 0;
  int patch_height = 0;
  std::uint64_t generator_seed = 0;
  double mismatch_prob = kDefaultMismatchProb;
};

struct Dataset {
  DatasetInfo info;
  std::vector<TrainingRecord> records;
};

/// Record i uses corpus[i % corpus.size()] and seed derive_seed(seed, i).
/// Output is identical for every thread count.
Dataset generate_dataset(const std::vector<Patch>& corpus, std::size_t count, double mismatch_prob,
                         std::uint64_t seed, int threads = 1);

/// Directory layout:
///   manifest.txt           key = value (format_version, patch size, count, seed)
///   records/NNNNNN.bin     clean then noisy, little-endian float32, row-major
///   records/NNNNNN.txt     metadata (fed.*, used.*), truth.*, mean_intensity
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Non-overlapping row-major tiles; partial tiles at the right/bottom edge
/// are dropped. Throws std::domain_error if no full tile fits.
std::vector<Patch> tile_image(const Image& image, int patch_size);

/// Noise-free synthetic scene: smooth gradient plus soft-edged shapes, values
/// within [25, 230].
Image synthesize_clean_image(int width, int height, std::uint64_t seed);

/// `count` synthetic clean patches.
std::vector<Patch> synthetic_corpus(std::size_t count, int patch_size, std::uint64_t seed);

/// Tiles every .pgm / .png in `dir` (sorted by name). 16-bit inputs are
/// scaled down to 8 bits.
std::vector<Patch> load_clean_corpus(const std::filesystem::path& dir, int patch_size);

}  // namespace camnoise
