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

#include "camnoise/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "camnoise/rng.hpp"

namespace camnoise {

namespace {

constexpr int kPsdGridPoints = 4096;
constexpr double kPsdLowFrequency = 1.0;  // Hz

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

void check_intensity(double mean_intensity) {
  if (!std::isfinite(mean_intensity) || mean_intensity < 0.0 || mean_intensity > kMaxDn)
    throw std::domain_error("mean intensity " + format_exact(mean_intensity) + " outside [0, 255]");
}

}  // namespace

NoiseLevels NoiseLevels::compose(double pn, double dcsn, double rn, double xi) {
  NoiseLevels l;
  l.sigma_pn = pn;
  l.sigma_dcsn = dcsn;
  l.sigma_rn = rn;
  l.xi = xi;
  l.sigma_total = std::sqrt(pn * pn + dcsn * dcsn + rn * rn) + xi;
  return l;
}

double NoiseLevels::source_total() const {
  return std::sqrt(sigma_pn * sigma_pn + sigma_dcsn * sigma_dcsn + sigma_rn * sigma_rn);
}

bool satisfies_composition(const NoiseLevels& l, double rel_tol) {
  const double expected = l.source_total() + l.xi;
  return std::abs(expected - l.sigma_total) <= rel_tol * std::max(1.0, std::abs(l.sigma_total));
}

GainChain gain_chain(const CameraMetadata& meta) {
  GainChain g;
  g.volts_per_electron = meta.sense_node_gain * meta.fixed.source_follower_gain * meta.fixed.cds_gain;
  g.adc_dn_per_volt = kMaxDn / (meta.full_well_capacity * g.volts_per_electron);
  g.digital_gain = std::pow(10.0, meta.camera_gain / 20.0);
  return g;
}

double to_kelvin(double celsius) { return celsius + phys::kCelsiusOffset; }

double silicon_band_gap_ev(double kelvin) {
  return 1.1557 - 7.021e-4 * kelvin * kelvin / (1108.0 + kelvin);
}

double dark_current_rate(const CameraMetadata& meta) {
  const double t = to_kelvin(meta.sensor_temperature);
  const double pixel_cm = meta.sensor_pixel_size * 0.1;
  const double area_cm2 = pixel_cm * pixel_cm;
  const double activation = std::exp(-silicon_band_gap_ev(t) / (2.0 * phys::kBoltzmannEv * t));
  return phys::kDarkCurrentPrefactor * area_cm2 * meta.dark_signal_fom * std::pow(t, 1.5) * activation;
}

double dark_current_electrons(const CameraMetadata& meta) {
  validate_physical(meta);
  return dark_current_rate(meta) * meta.exposure_time;
}

double reset_sigma_electrons(const CameraMetadata& meta) {
  if (meta.sensor_type == SensorType::CCD) return 0.0;
  const double t = to_kelvin(meta.sensor_temperature);
  // kTC noise on the sense-node capacitance C = q / A_SN, expressed in charge.
  const double ktc = std::sqrt(phys::kBoltzmann * t / (phys::kElementaryCharge * meta.sense_node_gain));
  return meta.sense_node_reset_factor * ktc;
}

double source_follower_sigma_volts(const CameraMetadata& meta) {
  const auto& f = meta.fixed;
  const double t_s2s = f.cds_sample_to_sample_time;
  const double tau_d = f.cds_time_factor * t_s2s;
  const double tau_rts = 0.1 * tau_d;
  const double white2 = meta.thermal_white_noise * meta.thermal_white_noise;
  const double burst_amp = 2.0 * f.source_follower_current_modulation * f.source_follower_current_modulation * tau_rts;
  const double f_hi = meta.pixel_clock_rate;
  if (f_hi <= kPsdLowFrequency) return 0.0;

  const double two_pi = 2.0 * std::numbers::pi;
  auto integrand = [&](double freq) {
    const double psd = white2 * (1.0 + f.flicker_corner_frequency / freq) +
                       burst_amp / (4.0 + std::pow(two_pi * tau_rts * freq, 2));
    const double h = (2.0 - 2.0 * std::cos(two_pi * freq * t_s2s)) / (1.0 + std::pow(two_pi * freq * tau_d, 2));
    return psd * h;
  };

  // Trapezoid on a log-spaced grid.
  const double log_lo = std::log(kPsdLowFrequency);
  const double step = (std::log(f_hi) - log_lo) / (kPsdGridPoints - 1);
  double prev_f = kPsdLowFrequency;
  double prev_v = integrand(prev_f);
  double variance = 0.0;
  for (int i = 1; i < kPsdGridPoints; ++i) {
    const double freq = i == kPsdGridPoints - 1 ? f_hi : std::exp(log_lo + step * i);
    const double v = integrand(freq);
    variance += 0.5 * (v + prev_v) * (freq - prev_f);
    prev_f = freq;
    prev_v = v;
  }
  const double settling = 1.0 - std::exp(-t_s2s / tau_d);
  return std::sqrt(variance) / (f.source_follower_gain * settling);
}

double readout_sigma_volts(const CameraMetadata& meta) {
  validate_physical(meta);
  const double reset_v = reset_sigma_electrons(meta) * meta.sense_node_gain;
  const double sf_v = source_follower_sigma_volts(meta);
  return std::sqrt(reset_v * reset_v + sf_v * sf_v);
}

double readout_sigma_electrons(const CameraMetadata& meta) {
  return readout_sigma_volts(meta) / meta.sense_node_gain;
}

NoiseLevels predict_sigmas(const CameraMetadata& meta, double mean_intensity) {
  validate_physical(meta);
  check_intensity(mean_intensity);
  const double k = gain_chain(meta).dn_per_electron();
  // The intensity is output-referred, so the collected charge is I / K and
  // its shot noise in DN is sqrt(I * K).
  const double signal_dn = std::max(0.0, mean_intensity - meta.fixed.camera_offset);
  const double pn = std::sqrt(signal_dn * k);
  const double dcsn = std::sqrt(dark_current_electrons(meta)) * k;
  const double rn = readout_sigma_electrons(meta) * k;
  return NoiseLevels::compose(pn, dcsn, rn);
}

CorruptedPatch corrupt_patch(const Patch& clean, const CameraMetadata& meta, std::uint64_t seed) {
  validate_patch(clean);
  validate_physical(meta);
  const double k = gain_chain(meta).dn_per_electron();
  const double dark = dark_current_electrons(meta);
  const double rn_e = readout_sigma_electrons(meta);
  const double offset = meta.fixed.camera_offset;

  Rng rng(seed);
  Patch noisy = clean;
  auto out = noisy.values();
  auto in = clean.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double electrons = std::max(0.0, in[i] - offset) / k;
    const double shot = rng.poisson(electrons) - electrons;
    const double dark_shot = rng.poisson(dark) - dark;
    const double read = rng.normal(0.0, rn_e);
    out[i] = static_cast<float>(in[i] + (shot + dark_shot + read) * k);
  }
  quantize_8bit(noisy);
  return {std::move(noisy), predict_sigmas(meta, clean.mean())};
}

double clipped_std(double mean, double sigma, double lo, double hi) {
  if (sigma <= 0.0) return 0.0;
  const double a = (lo - mean) / sigma;
  const double b = (hi - mean) / sigma;
  const double p_lo = normal_cdf(a);
  const double p_hi = 1.0 - normal_cdf(b);
  const double p_mid = normal_cdf(b) - p_lo;
  const double d_a = normal_pdf(a);
  const double d_b = normal_pdf(b);
  const double m1 = lo * p_lo + hi * p_hi + mean * p_mid + sigma * (d_a - d_b);
  const double m2 = lo * lo * p_lo + hi * hi * p_hi + (mean * mean + sigma * sigma) * p_mid +
                    2.0 * mean * sigma * (d_a - d_b) + sigma * sigma * (a * d_a - b * d_b);
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

const std::vector<std::string_view>& sweep_parameters() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v{"mean_intensity"};
    for (const auto& info : kMetaFields) v.push_back(info.name);
    return v;
  }();
  return names;
}

std::vector<double> sweep_values(std::string_view param, int n) {
  if (n < 2) throw std::domain_error("sweep needs at least 2 samples");
  std::vector<double> values(n);
  auto linspace = [&](double lo, double hi) {
    for (int i = 0; i < n; ++i) values[i] = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
  };
  if (param == "mean_intensity") {
    linspace(0.0, kMaxDn);
    return values;
  }
  const auto field = field_from_name(param);
  if (!field) throw std::domain_error("unknown sweep parameter '" + std::string(param) + "'");
  const auto& info = field_info(*field);
  if (*field == MetaField::SensorType) return {0.0, 1.0};
  if (*field == MetaField::CameraGain) {
    const double lo = std::pow(10.0, info.min / 20.0);
    const double hi = std::pow(10.0, info.max / 20.0);
    linspace(lo, hi);
    for (double& v : values) v = 20.0 * std::log10(v);
    values.front() = info.min;
    values.back() = info.max;
    return values;
  }
  linspace(info.min, info.max);
  return values;
}

std::vector<SweepPoint> sensitivity_sweep(std::string_view param, int n, const CameraMetadata& fixed,
                                          double mean_intensity) {
  const std::vector<double> values = sweep_values(param, n);
  const bool sweep_intensity = param == "mean_intensity";
  if (!sweep_intensity) check_intensity(mean_intensity);
  const auto field = field_from_name(param);

  std::vector<SweepPoint> rows;
  rows.reserve(values.size());
  for (double v : values) {
    CameraMetadata meta = fixed;
    double intensity = mean_intensity;
    if (sweep_intensity)
      intensity = v;
    else
      set_field(meta, *field, v);
    SweepPoint p;
    p.value = v;
    p.levels = predict_sigmas(meta, intensity);
    p.observed_total = clipped_std(intensity, p.levels.sigma_total);
    rows.push_back(p);
  }
  return rows;
}

}  // namespace camnoise
