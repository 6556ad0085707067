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

#include "camnoise/estimator.hpp"
#include "camnoise/nn/ops.hpp"
#include "network_table.hpp"
#include "test_util.hpp"

namespace camnoise {
namespace {

using testkit::TempDir;

ModelVariant tiny(Variant kind, int patch = 16) { return {kind, 1.0 / 16.0, patch}; }

std::vector<TrainingRecord> tiny_records(std::size_t n, int patch = 16, std::uint64_t seed = 3) {
  return generate_dataset(synthetic_corpus(8, patch, seed), n, 0.5, seed).records;
}

TEST(Variant, Names) {
  for (Variant v : {Variant::DrneCust, Variant::WithoutMeta, Variant::MinMeta, Variant::FullMeta})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_EQ(to_string(Variant::FullMeta), "full_meta");
  EXPECT_THROW(variant_from_string("bogus"), std::invalid_argument);
}

TEST(Variant, Validation) {
  EXPECT_THROW(validate_variant({Variant::FullMeta, 0.0, 32}), std::domain_error);
  EXPECT_THROW(validate_variant({Variant::FullMeta, 1.0, 8}), std::domain_error);
  EXPECT_EQ((ModelVariant{Variant::FullMeta, 0.25, 32}).channels(), 16);
  EXPECT_EQ((ModelVariant{Variant::FullMeta, 0.001, 32}).channels(), 1);
}

TEST(ParameterCount, FullScale) {
  const Model drne = Model::build({Variant::DrneCust, 1.0, 128}, 1);
  const Model full = Model::build({Variant::FullMeta, 1.0, 128}, 1);
  EXPECT_EQ(drne.parameter_count(), 335873u);
  EXPECT_EQ(full.parameter_count(), 344612u);
  for (Variant v : {Variant::DrneCust, Variant::WithoutMeta, Variant::MinMeta, Variant::FullMeta}) {
    const ModelVariant mv{v, 1.0, 128};
    EXPECT_EQ(init_parameters<float>(mv, 0).parameter_count(), testkit::expected_parameter_count(mv)) << to_string(v);
  }
}

TEST(ParameterCount, ScaledTrunk) {
  const ModelVariant mv{Variant::FullMeta, 0.25, 32};
  EXPECT_EQ(init_parameters<float>(mv, 0).parameter_count(), testkit::expected_parameter_count(mv));
}

TEST(Shapes, TraceMatchesTableAtReducedWidth) {
  for (Variant v : {Variant::DrneCust, Variant::WithoutMeta, Variant::MinMeta, Variant::FullMeta}) {
    const ModelVariant mv = tiny(v, 24);
    auto params = init_parameters<float>(mv, 2);
    nn::Graph<float> g(params, 1, false);
    std::vector<BranchMetadata> meta(2, route_metadata(normalize_metadata(max_metadata()), v));
    std::vector<LayerShape> trace;
    forward<float>(g, mv, g.input(nn::Tensor<float>({2, 1, 24, 24}, 0.3f)), meta, &trace);
    EXPECT_EQ(trace, testkit::expected_layer_shapes(mv, 2)) << to_string(v);
  }
}

TEST(Metadata, NormalizationExamples) {
  for (double x : normalize_metadata(max_metadata(SensorType::CMOS))) EXPECT_EQ(x, 1.0);
  for (double x : normalize_metadata(min_metadata(SensorType::CCD))) EXPECT_EQ(x, 0.0);
  CameraMetadata m = min_metadata();
  m.sensor_temperature = 20.0;
  EXPECT_DOUBLE_EQ(normalize_metadata(m)[static_cast<std::size_t>(MetaField::SensorTemperature)], 0.25);
  m.sensor_temperature = 90.0;
  EXPECT_THROW(normalize_metadata(m), std::domain_error);
  bool clamped = false;
  EXPECT_EQ(normalize_metadata_clamped(m, &clamped)[static_cast<std::size_t>(MetaField::SensorTemperature)], 1.0);
  EXPECT_TRUE(clamped);
  normalize_metadata_clamped(max_metadata(), &clamped);
  EXPECT_FALSE(clamped);
}

TEST(Metadata, RoutingWidths) {
  const auto vec = normalize_metadata(max_metadata());
  const BranchMetadata full = route_metadata(vec, Variant::FullMeta);
  EXPECT_EQ(full.pn.size(), 2u);
  EXPECT_EQ(full.dcsn.size(), 5u);
  EXPECT_EQ(full.rn.size(), 5u);
  const BranchMetadata minimal = route_metadata(vec, Variant::MinMeta);
  EXPECT_EQ(minimal.pn.size(), 3u);
  EXPECT_EQ(minimal.rn.size(), 3u);
  EXPECT_TRUE(route_metadata(vec, Variant::WithoutMeta).pn.empty());
  EXPECT_TRUE(route_metadata(vec, Variant::DrneCust).dcsn.empty());
  for (const auto& fields : branch_fields(Variant::FullMeta))
    EXPECT_EQ(std::count(fields.begin(), fields.end(), MetaField::SensorType), 0);
}

TEST(Metadata, RoutedValuesFollowFieldOrder) {
  CameraMetadata m = min_metadata();
  m.full_well_capacity = field_info(MetaField::FullWellCapacity).max;
  const BranchMetadata b = route_metadata(normalize_metadata(m), Variant::FullMeta);
  EXPECT_EQ(b.pn, (std::vector<double>{0.0, 1.0}));
}

TEST(ResidualBlock, ZeroConvsPassSkip) {
  // With every 3x3 conv zeroed the trunk reduces to the 1x1 skip projection,
  // so the pooled feature is max(w * x + b) per channel.
  const ModelVariant mv = tiny(Variant::WithoutMeta);
  auto params = init_parameters<double>(mv, 4);
  for (auto& e : params.entries())
    if (e.name.rfind("trunk.", 0) == 0 && e.name.find("skip") == std::string::npos) e.value.fill(0.0);
  nn::Tensor<double> x({1, 1, 16, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 7) / 7.0;
  nn::ParameterSet<double> none;
  nn::Graph<double> ref(none, 1, false);
  const auto skip = nn::conv2d(ref, ref.input(x), ref.input(params.get("trunk.b0.skip.w").value),
                               ref.input(params.get("trunk.b0.skip.b").value));
  const auto pooled = nn::global_max_pool(ref, skip);

  nn::Graph<double> g(params, 1, false);
  forward<double>(g, mv, g.input(x), {});
  // The first (1, C) node on the tape is the shared pool.
  bool found = false;
  for (std::size_t v = 0; v < g.size() && !found; ++v)
    if (g.value(v).shape() == nn::Shape{1, mv.channels()}) {
      EXPECT_EQ(g.value(v), ref.value(pooled));
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(ModelTest, CheckpointRoundTripIsBitExact) {
  TempDir dir;
  const Model m = Model::build(tiny(Variant::FullMeta), 9, 15.0);
  m.save(dir / "m.ckpt");
  const Model back = Model::load(dir / "m.ckpt");
  EXPECT_EQ(back.variant().kind, Variant::FullMeta);
  EXPECT_EQ(back.variant().patch_size, 16);
  EXPECT_EQ(back.xi_max(), 15.0);
  ASSERT_EQ(back.params().entries().size(), m.params().entries().size());
  for (std::size_t i = 0; i < m.params().entries().size(); ++i)
    EXPECT_EQ(back.params().entries()[i].value, m.params().entries()[i].value);

  const Patch p = synthesize_clean_image(16, 16, 1);
  const auto a = estimate(m, p, max_metadata());
  const auto b = estimate(back, p, max_metadata());
  EXPECT_EQ(a.raw, b.raw);
}

TEST(ModelTest, RejectsChangedFieldOrder) {
  const Model m = Model::build(tiny(Variant::FullMeta), 9);
  nn::Checkpoint ck{m.manifest(), m.params()};
  ck.manifest.set("metadata_fields", std::string("exposure_time,camera_gain"));
  EXPECT_THROW(Model::from_checkpoint(ck), nn::CheckpointError);
}

TEST(ModelTest, RejectsMismatchedParameters) {
  auto params = init_parameters<float>(tiny(Variant::WithoutMeta), 1);
  EXPECT_THROW(Model(tiny(Variant::FullMeta), params), nn::ShapeError);
}

TEST(Targets, LayoutAndXiScaling) {
  TrainingRecord r;
  r.truth = NoiseLevels::compose(3.0, 4.0, 12.0, -30.0);
  EXPECT_EQ(training_target(r, Variant::FullMeta, 20.0), (std::vector<float>{3.0f, 4.0f, 12.0f, -1.0f}));
  r.truth = NoiseLevels::compose(3.0, 4.0, 12.0, 5.0);
  EXPECT_EQ(training_target(r, Variant::WithoutMeta, 20.0)[3], 0.25f);
  EXPECT_EQ(training_target(r, Variant::DrneCust, 20.0), (std::vector<float>{13.0f}));
}

TEST(Training, DeterministicForSeed) {
  const auto records = tiny_records(20);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  const auto a = train(tiny(Variant::FullMeta), records, cfg, 77);
  const auto b = train(tiny(Variant::FullMeta), records, cfg, 77);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  for (std::size_t i = 0; i < a.model.params().entries().size(); ++i)
    EXPECT_EQ(a.model.params().entries()[i].value, b.model.params().entries()[i].value);
  const auto c = train(tiny(Variant::FullMeta), records, cfg, 78);
  EXPECT_NE(a.epoch_loss, c.epoch_loss);
}

TEST(Training, ConstantTargetConverges) {
  // Every record carries the same truth, so only the output biases must move.
  TrainingRecord base = tiny_records(1).front();
  std::vector<TrainingRecord> records(24, base);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 8;
  cfg.lr = 3e-3;
  const auto result = train(tiny(Variant::WithoutMeta), records, cfg, 5);
  EXPECT_LT(result.epoch_loss.back(), 0.05 * result.epoch_loss.front());
  const auto e = estimate(result.model, base.noisy, std::nullopt);
  EXPECT_NEAR(e.levels.sigma_pn, base.truth.sigma_pn, 0.2 * std::max(1.0, base.truth.sigma_pn));
}

TEST(Training, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train(tiny(Variant::FullMeta), {}, cfg, 1), std::domain_error);
  cfg.epochs = 0;
  const auto records = tiny_records(2);
  EXPECT_THROW(train(tiny(Variant::FullMeta), records, cfg, 1), std::domain_error);
  cfg.epochs = 1;
  EXPECT_THROW(train(tiny(Variant::FullMeta, 32), records, cfg, 1), std::domain_error);
}

TEST(Training, DivergenceIsReported) {
  const auto records = tiny_records(4);
  Model m = Model::build(tiny(Variant::WithoutMeta), 1);
  m.params().get("head.pn.fc3.b").value.fill(std::numeric_limits<float>::quiet_NaN());
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train_model(m, records, cfg, 1);
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(Inference, WrongPatchSizeAndMissingMetadata) {
  const Model m = Model::build(tiny(Variant::FullMeta), 1);
  EXPECT_THROW(estimate(m, Patch(20, 20, 1.0f), max_metadata()), std::domain_error);
  EXPECT_THROW(estimate(m, Patch(16, 16, 1.0f), std::nullopt), std::domain_error);
  const Model wo = Model::build(tiny(Variant::WithoutMeta), 1);
  EXPECT_NO_THROW(estimate(wo, Patch(16, 16, 1.0f), std::nullopt));
}

TEST(Inference, OutputsAreComposedAndClamped) {
  const Model m = Model::build(tiny(Variant::FullMeta), 3);
  const auto e = estimate(m, synthesize_clean_image(16, 16, 2), max_metadata());
  ASSERT_EQ(e.raw.size(), 4u);
  EXPECT_GE(e.levels.sigma_pn, 0.0);
  EXPECT_EQ(e.levels.sigma_pn, std::max(0.0, e.raw[0]));
  EXPECT_DOUBLE_EQ(e.levels.xi, e.raw[3] * kDefaultXiMax);
  EXPECT_TRUE(satisfies_composition(e.levels));
  const Model d = Model::build(tiny(Variant::DrneCust), 3);
  EXPECT_TRUE(estimate(d, Patch(16, 16, 9.0f), std::nullopt).total_only);
}

TEST(Inference, ClampedMetadataIsFlagged) {
  const Model m = Model::build(tiny(Variant::FullMeta), 3);
  CameraMetadata meta = max_metadata();
  meta.sensor_temperature = 95.0;
  EXPECT_TRUE(estimate(m, Patch(16, 16, 9.0f), meta).metadata_clamped);
  EXPECT_FALSE(estimate(m, Patch(16, 16, 9.0f), max_metadata()).metadata_clamped);
}

TEST(Inference, BatchMatchesSingleAndThreads) {
  const Model m = Model::build(tiny(Variant::MinMeta), 3);
  std::vector<Patch> patches;
  for (int i = 0; i < 70; ++i) patches.push_back(synthesize_clean_image(16, 16, i));
  std::vector<CameraMetadata> metas(patches.size(), max_metadata());
  const auto batch = estimate_batch(m, patches, metas, 1);
  const auto threaded = estimate_batch(m, patches, metas, 3);
  for (std::size_t i = 0; i < patches.size(); ++i) EXPECT_EQ(batch[i].raw, threaded[i].raw);
  EXPECT_NEAR(estimate(m, patches[65], max_metadata()).raw[0], batch[65].raw[0], 1e-5);
}

TEST(Inference, ImageTilesAndMean) {
  const Model m = Model::build({Variant::WithoutMeta, 1.0 / 32.0, 128}, 3);
  const ImageEstimate est = estimate_image(m, Image(1280, 1024, 60.0f), std::nullopt);
  ASSERT_EQ(est.patches.size(), 80u);
  EXPECT_NEAR(est.mean.sigma_pn, est.patches[0].levels.sigma_pn, 1e-9);
  EXPECT_THROW(estimate_image(m, Image(100, 100), std::nullopt), std::domain_error);
}

}  // namespace
}  // namespace camnoise
