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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "camnoise/dataset.hpp"
#include "camnoise/noise_model.hpp"
#include "camnoise/rng.hpp"

using namespace camnoise;

namespace {

// Independent oracles.

double oracle_dn_per_electron(double full_well, double gain_db) {
  return 255.0 / full_well * std::pow(10.0, gain_db / 20.0);
}

double oracle_dark_rate(double celsius, double dfm, double pixel_mm) {
  const double t = celsius + 273.15;
  const double eg = 1.1557 - 7.021e-4 * t * t / (1108.0 + t);
  const double area = (pixel_mm * 0.1) * (pixel_mm * 0.1);
  return 2.55e15 * area * dfm * std::pow(t, 1.5) * std::exp(-eg / (2.0 * 8.617333262e-5 * t));
}

/// Simpson integration of the clamped-normal second moment.
double oracle_clipped_std(double mean, double sigma) {
  const int n = 200000;
  const double lo = std::max(0.0, mean - 12 * sigma), hi = std::min(255.0, mean + 12 * sigma);
  auto pdf = [&](double x) { return std::exp(-0.5 * std::pow((x - mean) / sigma, 2)) / (sigma * std::sqrt(2 * std::numbers::pi)); };
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0))); };
  double m0 = 0, m1 = 0, m2 = 0;
  const double h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    m0 += w * pdf(x);
    m1 += w * x * pdf(x);
    m2 += w * x * x * pdf(x);
  }
  m0 *= h / 3;
  m1 *= h / 3;
  m2 *= h / 3;
  const double p_lo = cdf(0.0), p_hi = 1.0 - cdf(255.0);
  m1 += 255.0 * p_hi;
  m2 += 255.0 * 255.0 * p_hi;
  (void)p_lo;
  return std::sqrt(m2 - m1 * m1);
}

CameraMetadata with(CameraMetadata m, MetaField f, double v) {
  set_field(m, f, v);
  return m;
}

}  // namespace

TEST(NoiseModel, CompositionIdentity) {
  const auto l = NoiseLevels::compose(3, 4, 12, -1);
  EXPECT_DOUBLE_EQ(l.sigma_total, 12.0);
  EXPECT_DOUBLE_EQ(l.source_total(), 13.0);
  EXPECT_TRUE(satisfies_composition(l));
  NoiseLevels bad = l;
  bad.sigma_total += 0.1;
  EXPECT_FALSE(satisfies_composition(bad));
}

TEST(NoiseModel, ConversionGainMapsFullWellTo255AtUnityGain) {
  for (double fw : {2e3, 37e3, 100e3})
    for (double g : {0.0, 6.0, 24.0}) {
      CameraMetadata m = max_metadata();
      m.full_well_capacity = fw;
      m.camera_gain = g;
      m.sense_node_gain = 3e-6;
      EXPECT_NEAR(gain_chain(m).dn_per_electron(), oracle_dn_per_electron(fw, g), 1e-12 * oracle_dn_per_electron(fw, g));
    }
  CameraMetadata m = max_metadata();
  m.camera_gain = 0.0;
  EXPECT_NEAR(gain_chain(m).dn_per_electron() * m.full_well_capacity, 255.0, 1e-9);
}

TEST(NoiseModel, BandGapAndDarkCurrent) {
  EXPECT_NEAR(silicon_band_gap_ev(353.15), 1.0957729924461896, 1e-12);
  EXPECT_NEAR(silicon_band_gap_ev(0.0), 1.1557, 1e-15);
  for (double t : {0.0, 25.0, 80.0})
    for (double px : {0.0009, 0.005, 0.01}) {
      CameraMetadata m = max_metadata();
      m.sensor_temperature = t;
      m.sensor_pixel_size = px;
      m.dark_signal_fom = 0.4;
      const double expected = oracle_dark_rate(t, 0.4, px);
      EXPECT_NEAR(dark_current_rate(m), expected, 1e-12 * expected);
      EXPECT_NEAR(dark_current_electrons(m), expected * m.exposure_time, 1e-12 * expected);
    }
}

TEST(NoiseModel, DarkCurrentEdgeCases) {
  CameraMetadata m = max_metadata();
  m.dark_signal_fom = 0.0;
  EXPECT_EQ(dark_current_electrons(m), 0.0);
  m = max_metadata();
  m.exposure_time = 0.0;
  EXPECT_EQ(dark_current_electrons(m), 0.0);
}

TEST(NoiseModel, DarkCurrentIncreasesWithTemperature) {
  double prev = -1;
  for (double t = 0; t <= 80; t += 5) {
    const double d = dark_current_electrons(with(max_metadata(), MetaField::SensorTemperature, t));
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(NoiseModel, ResetNoise) {
  const CameraMetadata cmos = max_metadata(SensorType::CMOS);
  EXPECT_NEAR(reset_sigma_electrons(cmos), 78.01552719204773, 1e-9);
  EXPECT_NEAR(reset_sigma_electrons(with(cmos, MetaField::SenseNodeResetFactor, 0.5)), 0.5 * 78.01552719204773, 1e-9);
  EXPECT_EQ(reset_sigma_electrons(max_metadata(SensorType::CCD)), 0.0);
}

TEST(NoiseModel, SourceFollowerMatchesDenseLinearGridOracle) {
  // Frozen from a brute-force trapezoid on a 15 Hz linear grid.
  struct Case {
    double w, clock, sigma;
  } cases[] = {{60e-9, 150e6, 6.447447991479374e-05},
               {60e-9, 8e6, 6.357401373822586e-05},
               {1e-9, 150e6, 1.0745759355942517e-06},
               {20e-9, 50e6, 2.145783787181021e-05}};
  for (const auto& c : cases) {
    CameraMetadata m = max_metadata();
    m.thermal_white_noise = c.w;
    m.pixel_clock_rate = c.clock;
    EXPECT_NEAR(source_follower_sigma_volts(m), c.sigma, 1e-4 * c.sigma) << c.w << " " << c.clock;
  }
}

TEST(NoiseModel, ReadoutMonotoneInWhiteNoiseAndResetFactor) {
  double prev = -1;
  for (double w = 1e-9; w <= 60e-9; w += 5e-9) {
    const double r = readout_sigma_volts(with(max_metadata(), MetaField::ThermalWhiteNoise, w));
    EXPECT_GE(r, prev);
    prev = r;
  }
  prev = -1;
  for (double f = 0; f <= 1.0; f += 0.1) {
    const double r = readout_sigma_volts(with(max_metadata(), MetaField::SenseNodeResetFactor, f));
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(NoiseModel, AllMaxConfigurationAtMidGray) {
  const NoiseLevels l = predict_sigmas(max_metadata(), 128.0);
  EXPECT_NEAR(l.sigma_pn, 2.2744430923180015, 1e-6);
  EXPECT_NEAR(l.sigma_dcsn, 9.159469816409496, 1e-6);
  EXPECT_NEAR(l.sigma_rn, 3.195759034801429, 1e-4);
  EXPECT_NEAR(l.sigma_total, 9.964028026176193, 1e-4);
  // Published total for this configuration.
  EXPECT_NEAR(l.sigma_total, 10.1, 0.15 * 10.1);
  EXPECT_EQ(l.xi, 0.0);
  EXPECT_TRUE(satisfies_composition(l));
}

TEST(NoiseModel, ShotNoiseScalesWithSqrtIntensity) {
  const CameraMetadata m = max_metadata();
  const double k = gain_chain(m).dn_per_electron();
  for (double i : {0.0, 1.0, 64.0, 255.0}) EXPECT_NEAR(predict_sigmas(m, i).sigma_pn, std::sqrt(i * k), 1e-12);
}

TEST(NoiseModel, IntensityOutOfRangeThrows) {
  EXPECT_THROW(predict_sigmas(max_metadata(), 300.0), std::domain_error);
  EXPECT_THROW(predict_sigmas(max_metadata(), -1.0), std::domain_error);
  CameraMetadata bad = max_metadata();
  bad.sense_node_gain = 0.0;
  EXPECT_THROW(predict_sigmas(bad, 10.0), std::domain_error);
}

TEST(NoiseModel, CompositionHoldsOnRandomMetadata) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const CameraMetadata m = sample_metadata(s);
    Rng r(s);
    const NoiseLevels l = predict_sigmas(m, r.uniform(0, 255));
    EXPECT_TRUE(satisfies_composition(l, 1e-12));
    EXPECT_GE(l.sigma_pn, 0);
    EXPECT_GE(l.sigma_dcsn, 0);
    EXPECT_GE(l.sigma_rn, 0);
  }
}

TEST(NoiseModel, ClippedStdMatchesQuadrature) {
  for (double mean : {0.0, 5.0, 128.0, 250.0, 255.0})
    for (double sigma : {0.5, 4.0, 30.0, 118.0}) {
      EXPECT_NEAR(clipped_std(mean, sigma), oracle_clipped_std(mean, sigma), 1e-6) << mean << " " << sigma;
    }
  EXPECT_EQ(clipped_std(100.0, 0.0), 0.0);
  EXPECT_NEAR(clipped_std(128.0, 3.0), 3.0, 1e-12);
}

TEST(NoiseModel, CorruptPatchDeterministicPerSeed) {
  const Patch clean(32, 32, 100.0f);
  const auto a = corrupt_patch(clean, max_metadata(), 7);
  const auto b = corrupt_patch(clean, max_metadata(), 7);
  const auto c = corrupt_patch(clean, max_metadata(), 8);
  EXPECT_EQ(a.noisy, b.noisy);
  EXPECT_NE(a.noisy, c.noisy);
  EXPECT_EQ(a.truth, predict_sigmas(max_metadata(), 100.0));
}

TEST(NoiseModel, CorruptPatchOutputIsQuantized) {
  const Patch clean(64, 64, 250.0f);
  const auto out = corrupt_patch(clean, max_metadata(), 1);
  for (float v : out.noisy.values()) {
    ASSERT_EQ(v, std::nearbyint(v));
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 255.0f);
  }
}

TEST(NoiseModel, CorruptPatchStatisticsMatchPrediction) {
  const int n = 128;
  const Patch clean(n, n, 128.0f);
  const auto out = corrupt_patch(clean, max_metadata(), 2024);
  const double sigma = out.truth.sigma_total;
  const double count = n * n;
  EXPECT_NEAR(out.noisy.stddev(), sigma, 3.0 * sigma / std::sqrt(2.0 * count));
  EXPECT_NEAR(out.noisy.mean(), 128.0, 4.0 * sigma / std::sqrt(count));
}

TEST(NoiseModel, NoiselessConfiguration) {
  CameraMetadata m = min_metadata(SensorType::CCD);
  m.dark_signal_fom = 0.0;
  const auto out = corrupt_patch(Patch(16, 16, 0.0f), m, 3);
  for (float v : out.noisy.values()) EXPECT_LE(v, 1.0f);
}

TEST(NoiseModel, SweepValuesEndpointsAndGainSpacing) {
  const auto t = sweep_values("exposure_time", 10);
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.front(), 0.001);
  EXPECT_EQ(t.back(), 0.2);
  const auto g = sweep_values("camera_gain", 10);
  const double amax = std::pow(10.0, 24.0 / 20.0);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(g[i], 20.0 * std::log10(1.0 + (amax - 1.0) * i / 9.0), 1e-9);
  const auto s = sweep_values("sensor_type", 10);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_THROW(sweep_values("bogus", 10), std::domain_error);
  EXPECT_THROW(sweep_values("exposure_time", 1), std::domain_error);
}

TEST(NoiseModel, SweepRowsIncreaseWithNoiseDrivers) {
  for (const char* p : {"camera_gain", "exposure_time", "sensor_temperature", "dark_signal_fom",
                        "sensor_pixel_size", "sense_node_reset_factor"}) {
    const auto rows = sensitivity_sweep(p, 10, max_metadata(), 128.0);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].observed_total, rows[i - 1].observed_total) << p;
  }
  const auto fw = sensitivity_sweep("full_well_capacity", 10, max_metadata(), 128.0);
  for (std::size_t i = 1; i < fw.size(); ++i) EXPECT_LT(fw[i].observed_total, fw[i - 1].observed_total);
}

TEST(NoiseModel, SweepParametersListed) {
  const auto& p = sweep_parameters();
  EXPECT_EQ(p.size(), 12u);
  EXPECT_EQ(p.front(), "mean_intensity");
}
