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
#include <filesystem>

#include "camnoise/kv_text.hpp"
#include "camnoise/realnoise.hpp"
#include "camnoise/rng.hpp"
#include "test_util.hpp"

namespace camnoise {
namespace {

using testkit::TempDir;

// Clipped, rounded Gaussian capture.
Image truncated_gaussian(int w, int h, double mu, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (float& v : img.values()) v = std::max(0.0f, static_cast<float>(std::nearbyint(rng.normal(mu, sigma))));
  return img;
}

TEST(Histogram, CountsRoundedValues) {
  Image img(4, 1, std::vector<float>{0.4f, 0.6f, 1.2f, 3.0f});
  const Histogram h = build_histogram(img);
  EXPECT_EQ(h.at(0), 1.0);
  EXPECT_EQ(h.at(1), 2.0);
  EXPECT_EQ(h.at(3), 1.0);
  EXPECT_EQ(h.size(), 3u);
}

TEST(Histogram, ModeIgnoresZeroBinAndBreaksTiesLow) {
  EXPECT_EQ(histogram_mode({{0, 100.0}, {1, 5.0}, {2, 7.0}, {3, 7.0}}), 2);
  EXPECT_THROW(histogram_mode({{0, 100.0}}), DegenerateDistributionError);
  EXPECT_THROW(histogram_mode({}), DegenerateDistributionError);
}

TEST(Histogram, MirrorOverwritesLowSide) {
  const Histogram h{{0, 50.0}, {1, 8.0}, {2, 10.0}, {3, 8.0}, {4, 5.0}, {5, 2.0}};
  const Histogram f = fix_histogram(h, 2);
  EXPECT_EQ(f.at(0), 5.0);
  EXPECT_EQ(f.at(-1), 2.0);
  EXPECT_EQ(f.at(1), 8.0);
  EXPECT_EQ(f.at(2), 10.0);
  EXPECT_EQ(f.at(5), 2.0);
}

TEST(Histogram, MirrorIsIdempotent) {
  const Histogram h = build_histogram(truncated_gaussian(200, 200, 3.0, 5.0, 1));
  const long m = histogram_mode(h);
  const Histogram once = fix_histogram(h, m);
  EXPECT_EQ(fix_histogram(once, m), once);
}

TEST(FitNormal, SingleBin) {
  const FittedGaussian f = fit_normal({{7, 30.0}});
  EXPECT_EQ(f.mu, 7.0);
  EXPECT_EQ(f.sigma, 0.0);
  EXPECT_THROW(fit_normal({}), DegenerateDistributionError);
}

TEST(FitNormal, ExactProfile) {
  Histogram h;
  for (long x = -30; x <= 40; ++x) h[x] = 1e5 * std::exp(-0.5 * std::pow((x - 4.5) / 6.0, 2));
  const FittedGaussian f = fit_normal(h);
  EXPECT_NEAR(f.mu, 4.5, 1e-6);
  EXPECT_NEAR(f.sigma, 6.0, 1e-6);
}

TEST(FixNoise, RecoversTruncatedGaussian) {
  const Image img = truncated_gaussian(1000, 1000, 2.0, 4.0, 3);
  const FittedGaussian f = fix_noise_distribution(img);
  EXPECT_NEAR(f.mu, 2.0, 0.05 * 2.0);
  EXPECT_NEAR(f.sigma, 4.0, 0.05 * 4.0);
}

TEST(Rectify, SubtractsInQuadrature) {
  const FittedGaussian r = rectify_dcsn({5.0, 5.0}, {2.0, 3.0});
  EXPECT_DOUBLE_EQ(r.mu, 3.0);
  EXPECT_DOUBLE_EQ(r.sigma, 4.0);
  EXPECT_DOUBLE_EQ(rectify_dcsn({1.0, 3.0}, {1.0, 3.0}).sigma, 0.0);
  try {
    rectify_dcsn({1.0, 2.0}, {0.0, 3.0});
    FAIL();
  } catch (const NegativeVarianceError& e) {
    EXPECT_EQ(e.dcsn.sigma, 2.0);
    EXPECT_EQ(e.rn.sigma, 3.0);
  }
}

TEST(Resample, MomentsMatch) {
  const Image img = resample_noise_image({1.5, 2.0}, 300, 300, 9);
  EXPECT_NEAR(img.mean(), 1.5, 0.03);
  EXPECT_NEAR(img.stddev(), 2.0, 0.03);
  EXPECT_EQ(img, resample_noise_image({1.5, 2.0}, 300, 300, 9));
  EXPECT_THROW(resample_noise_image({0.0, -1.0}, 2, 2, 1), std::domain_error);
}

TEST(Fpn, RemovesPatternWithinBound) {
  constexpr int kW = 64, kH = 64, kS = 20, kN = 60;
  constexpr double kSigma = 2.0;
  Rng rng(17);
  Image pattern(kW, kH);
  for (float& v : pattern.values()) v = static_cast<float>(rng.normal(0.0, 25.0));
  std::vector<Image> images;
  for (int k = 0; k < kN; ++k) {
    Image img = pattern;
    for (float& v : img.values()) v += static_cast<float>(rng.normal(0.0, kSigma));
    images.push_back(std::move(img));
  }
  const auto corrected = correct_fpn(images, kS);
  ASSERT_EQ(corrected.size(), static_cast<std::size_t>(kN - kS));
  double sq = 0.0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    double m = 0.0;
    for (const auto& img : corrected) m += img.values()[i];
    m /= corrected.size();
    sq += m * m;
  }
  EXPECT_LT(std::sqrt(sq / pattern.size()), 3.0 * kSigma / std::sqrt(kS));
}

TEST(Fpn, Errors) {
  std::vector<Image> images(20, Image(4, 4));
  EXPECT_THROW(correct_fpn(images, 20), std::domain_error);
  images.push_back(Image(4, 5));
  EXPECT_THROW(correct_fpn(images, 20), std::domain_error);
  EXPECT_THROW(correct_fpn(images, 0), std::domain_error);
}

TEST(Session, ValidationErrors) {
  SessionSpec spec;
  spec.pairs = 3;
  spec.width = spec.height = 8;
  NoiseSession s = synthesize_session(spec, 1);
  EXPECT_NO_THROW(validate_session(s));
  NoiseSession bad = s;
  bad.camera_gain = 30.0;
  EXPECT_THROW(validate_session(bad), std::domain_error);
  bad = s;
  bad.pairs[1].dcsn = Image(4, 4);
  EXPECT_THROW(validate_session(bad), std::domain_error);
  bad = s;
  bad.pairs.clear();
  EXPECT_THROW(validate_session(bad), std::domain_error);
  bad = s;
  bad.bit_depth = 20;
  EXPECT_THROW(validate_session(bad), std::domain_error);
}

TEST(Session, TwentyPairsIsTooFew) {
  SessionSpec spec;
  spec.pairs = 20;
  spec.width = spec.height = 16;
  EXPECT_THROW(process_session(synthesize_session(spec, 1), 0), std::domain_error);
}

TEST(Session, PipelineRecoversParameters) {
  SessionSpec spec;
  spec.pairs = 22;
  spec.width = spec.height = 500;
  spec.rn_sigma = 2.0;
  spec.dcsn_sigma = 3.0;
  const NoiseSession s = synthesize_session(spec, 5);
  const ProcessedSession p = process_session(s, 11);
  ASSERT_EQ(p.fits.size(), 22u);
  ASSERT_EQ(p.rn.size(), 2u);
  ASSERT_EQ(p.dcsn.size(), 2u);
  for (const auto& f : p.fits) {
    EXPECT_NEAR(f.rn.sigma, spec.rn_sigma, 0.05 * spec.rn_sigma);
    EXPECT_NEAR(f.dcsn.mu, spec.dcsn_mu, 0.1 * spec.dcsn_mu);
    EXPECT_NEAR(f.dcsn.sigma, spec.dcsn_sigma, 0.05 * spec.dcsn_sigma);
  }
  EXPECT_NEAR(p.rn[0].mean(), 0.0, 0.2);
  EXPECT_EQ(process_session(s, 11, kDefaultFpnFrames, 3).rn, p.rn);
}

TEST(Session, RectificationFailureNamesPair) {
  SessionSpec spec;
  spec.pairs = 21;
  spec.width = spec.height = 32;
  NoiseSession s = synthesize_session(spec, 2);
  s.pairs[4].dcsn = s.pairs[4].rn;
  for (float& v : s.pairs[4].dcsn.values()) v = std::nearbyint(v * 0.5f) + 1.0f;
  try {
    process_session(s, 1);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("pair 4"), std::string::npos) << e.what();
  }
}

TEST(Session, To8Bit) {
  const FittedGaussian f = to_8bit({64.0, 32.0}, 12);
  EXPECT_EQ(f.mu, 4.0);
  EXPECT_EQ(f.sigma, 2.0);
}

TEST(Session, DiskRoundTrip) {
  TempDir dir;
  SessionSpec spec;
  spec.pairs = 2;
  spec.width = 10;
  spec.height = 6;
  spec.fpn_sigma = 3.0;
  const NoiseSession s = synthesize_session(spec, 8);
  write_session(s, dir / "session");
  const NoiseSession back = read_session(dir / "session");
  EXPECT_EQ(back.camera_gain, s.camera_gain);
  EXPECT_EQ(back.bit_depth, s.bit_depth);
  EXPECT_EQ(back.meta, s.meta);
  ASSERT_EQ(back.pairs.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(back.pairs[i].rn, s.pairs[i].rn);
    EXPECT_EQ(back.pairs[i].dcsn, s.pairs[i].dcsn);
    EXPECT_EQ(back.pairs[i].exposure_time, s.pairs[i].exposure_time);
  }
}

TEST(Session, WriteProcessed) {
  TempDir dir;
  SessionSpec spec;
  spec.pairs = 21;
  spec.width = spec.height = 128;
  const ProcessedSession p = process_session(synthesize_session(spec, 3), 4);
  write_processed(p, dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "rn_0000.f32"));
  EXPECT_EQ(std::filesystem::file_size(dir / "dcsn_0000.f32"), 128u * 128u * 4u);
  const KvText info = KvText::read(dir / "output.txt");
  EXPECT_EQ(info.get_int("frame_count"), 1);
  EXPECT_EQ(info.get_int("width"), 128);
}

}  // namespace
}  // namespace camnoise
