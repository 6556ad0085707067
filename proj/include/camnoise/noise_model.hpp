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

// Photon-transfer simulation of a single-channel sensor: photon shot noise
// (PN), dark-current shot noise (DCSN) and readout noise (RN), all reported as
// standard deviations in 8-bit digital numbers (DN).

#include <cstdint>
#include <string_view>
#include <vector>

#include "camnoise/image.hpp"
#include "camnoise/metadata.hpp"

namespace camnoise {

namespace phys {
inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kBoltzmannEv = 8.617333262e-5;     // eV/K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kCelsiusOffset = 273.15;
/// Prefactor of the dark-current rate in e-/s for pixel area in cm^2 and
/// figure of merit in nA/cm^2.
inline constexpr double kDarkCurrentPrefactor = 2.55e15;
}  // namespace phys

struct NoiseLevels {
  double sigma_pn = 0.0;
  double sigma_dcsn = 0.0;
  double sigma_rn = 0.0;
  double xi = 0.0;
  double sigma_total = 0.0;

  /// sigma_total = sqrt(pn^2 + dcsn^2 + rn^2) + xi.
  static NoiseLevels compose(double pn, double dcsn, double rn, double xi = 0.0);

  /// Quadrature sum of the three sources, without xi.
  double source_total() const;

  bool operator==(const NoiseLevels&) const = default;
};

/// True when sigma_total matches the composition of the other fields within
/// `rel_tol` (relative to max(1, sigma_total)).
bool satisfies_composition(const NoiseLevels& levels, double rel_tol = 1e-12);

/// Charge-to-DN conversion. The ADC is scaled so that a full well reads 255 DN
/// at 0 dB; camera gain is a digital amplitude factor on top.
struct GainChain {
  double volts_per_electron = 0.0;  // sense node * source follower * CDS
  double adc_dn_per_volt = 0.0;
  double digital_gain = 1.0;

  double dn_per_electron() const { return volts_per_electron * adc_dn_per_volt * digital_gain; }
};

GainChain gain_chain(const CameraMetadata& meta);

double to_kelvin(double celsius);

/// Temperature-dependent silicon band gap (Varshni form), eV.
double silicon_band_gap_ev(double kelvin);

/// Mean dark electrons per second for one pixel.
double dark_current_rate(const CameraMetadata& meta);

/// Mean dark electrons per pixel accumulated over the exposure.
double dark_current_electrons(const CameraMetadata& meta);

/// Sense-node reset (kTC) sigma in electrons after CDS compensation: scaled by
/// the reset factor for CMOS, zero for CCD.
double reset_sigma_electrons(const CameraMetadata& meta);

/// Source-follower sigma referred to the sense node, volts. Integrates the
/// white + flicker + random-telegraph PSD through the CDS transfer function.
double source_follower_sigma_volts(const CameraMetadata& meta);

/// Reset and source-follower noise added in quadrature, sense-node volts.
double readout_sigma_volts(const CameraMetadata& meta);

double readout_sigma_electrons(const CameraMetadata& meta);

/// Deterministic per-source sigmas in DN at a given mean intensity (xi = 0).
/// Throws std::domain_error for intensities outside [0, 255].
NoiseLevels predict_sigmas(const CameraMetadata& meta, double mean_intensity);

struct CorruptedPatch {
  Patch noisy;
  NoiseLevels truth;
};

/// Adds one sampled realization of PN, DCSN and RN to `clean`, then rounds
/// half-to-even and clips to [0, 255]. The shot-noise terms are zero-mean
/// (Poisson draw minus its mean). `truth` is predict_sigmas at the clean mean.
CorruptedPatch corrupt_patch(const Patch& clean, const CameraMetadata& meta, std::uint64_t seed);

/// Standard deviation of clamp(X, lo, hi) for X ~ N(mean, sigma^2). This is
/// the noise level one observes in a saturating 8-bit image.
double clipped_std(double mean, double sigma, double lo = 0.0, double hi = kMaxDn);

struct SweepPoint {
  double value = 0.0;          // swept parameter value
  NoiseLevels levels;          // predict_sigmas at this point
  double observed_total = 0.0; // clipped_std(intensity, levels.sigma_total)
};

/// Sample points for a sweep: `n` uniform samples over the parameter's range
/// (endpoints included). camera_gain is sampled uniformly in linear amplitude
/// and reported in dB; sensor_type yields {0, 1}.
std::vector<double> sweep_values(std::string_view param, int n);

/// One-at-a-time sensitivity of the total noise level. `param` is a variable
/// metadata field name or "mean_intensity". Rows are in ascending order.
std::vector<SweepPoint> sensitivity_sweep(std::string_view param, int n, const CameraMetadata& fixed,
                                          double mean_intensity);

/// Parameter names accepted by sensitivity_sweep, in table order.
const std::vector<std::string_view>& sweep_parameters();

}  // namespace camnoise
