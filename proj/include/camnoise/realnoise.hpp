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

// Post-processing of dark-room noise captures: bias frames (readout noise
// only) and dark frames (dark-current shot noise on top of readout noise).
// Truncated histograms are repaired by mirroring, Gaussians are fitted, dark
// fits are rectified against the bias fit, clean noise images are resampled,
// and the residual fixed pattern is removed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "camnoise/image.hpp"
#include "camnoise/metadata.hpp"

namespace camnoise {

struct FittedGaussian {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Integer-bin histogram (bin width 1 DN). Keys may go negative after the
/// mirror step.
using Histogram = std::map<long, double>;

class DegenerateDistributionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NegativeVarianceError : public std::domain_error {
 public:
  NegativeVarianceError(FittedGaussian dcsn, FittedGaussian rn);
  FittedGaussian dcsn;
  FittedGaussian rn;
};

Histogram build_histogram(const Image& image);

/// Most populated bin among bins > 0 (lowest bin wins ties). Throws
/// DegenerateDistributionError when no positive bin exists.
long histogram_mode(const Histogram& hist);

/// Every bin x >= 2 * x_max is copied to 2 * x_max - x, replacing whatever
/// was there (the zero bin of a clipped capture holds the piled-up negative
/// tail).
Histogram fix_histogram(const Histogram& hist, long x_max);

/// Weighted least-squares fit of a Gaussian profile to the histogram, started
/// from its moments. A single occupied bin gives sigma = 0.
FittedGaussian fit_normal(const Histogram& hist);

/// histogram -> mode -> fix_histogram -> fit_normal.
FittedGaussian fix_noise_distribution(const Image& image);

/// (mu_dcsn - mu_rn, sqrt(sigma_dcsn^2 - sigma_rn^2)).
FittedGaussian rectify_dcsn(const FittedGaussian& dcsn, const FittedGaussian& rn);

/// i.i.d. N(mu, sigma^2) image.
Image resample_noise_image(const FittedGaussian& fit, int width, int height, std::uint64_t seed);

inline constexpr int kDefaultFpnFrames = 20;

/// Subtracts the pixel-wise mean of the first `s_fpn` images from each of the
/// remaining ones. Requires more than `s_fpn` images of equal shape.
std::vector<Image> correct_fpn(const std::vector<Image>& images, int s_fpn = kDefaultFpnFrames);

struct NoisePair {
  Image rn;
  Image dcsn;
  double exposure_time = 0.0;
};

struct NoiseSession {
  double camera_gain = 0.0;
  int bit_depth = 8;
  CameraMetadata meta;
  std::vector<NoisePair> pairs;
};

/// Session invariants: at least one pair, matching frame shapes, bias frames
/// at minimum exposure.
void validate_session(const NoiseSession& session);

struct PairFits {
  FittedGaussian rn;
  FittedGaussian dcsn_raw;
  FittedGaussian dcsn;  // rectified
};

struct ProcessedSession {
  std::vector<PairFits> fits;
  std::vector<Image> rn;    // FPN-corrected, count = pairs - s_fpn
  std::vector<Image> dcsn;
};

/// Runs the full pipeline. Fit and rectification errors are rethrown as
/// std::domain_error prefixed with "pair <i>:".
ProcessedSession process_session(const NoiseSession& session, std::uint64_t seed, int s_fpn = kDefaultFpnFrames,
                                 int threads = 1);

/// Scales a fit in native DN to the 8-bit range by 2^(bit_depth - 8).
FittedGaussian to_8bit(const FittedGaussian& fit, int bit_depth);

/// Session directory: session.txt (camera_gain, bit_depth, pair_count,
/// pair.<i>.exposure_time / .rn / .dcsn file names, meta.* fields) plus the
/// referenced 16-bit PGM frames.
NoiseSession read_session(const std::filesystem::path& dir);
void write_session(const NoiseSession& session, const std::filesystem::path& dir);

/// Writes corrected frames as raw little-endian float32 (rn_NNNN.f32,
/// dcsn_NNNN.f32), fits.csv, and output.txt describing the frame size.
void write_processed(const ProcessedSession& processed, const std::filesystem::path& dir);

struct SessionSpec {
  int pairs = 24;
  int width = 64;
  int height = 64;
  int bit_depth = 12;
  double camera_gain = 12.0;
  double rn_mu = 2.0;
  double rn_sigma = 4.0;
  double dcsn_mu = 3.0;     // rectified (dark-only) parameters
  double dcsn_sigma = 5.0;
  double fpn_sigma = 0.0;   // per-pixel fixed pattern added to every frame
};

/// Forward model for tests and demos: Gaussian frames, negatives clipped to 0,
/// rounded to integer DN. Dark frames contain bias noise plus dark noise.
NoiseSession synthesize_session(const SessionSpec& spec, std::uint64_t seed);

}  // namespace camnoise
