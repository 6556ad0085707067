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

#include "camnoise/nn/adam.hpp"
#include "camnoise/nn/checkpoint.hpp"
#include "camnoise/nn/graph.hpp"
#include "camnoise/nn/ops.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

namespace camnoise::nn {
namespace {

using testkit::TempDir;
using TF = Tensor<float>;
using TD = Tensor<double>;

TEST(TensorTest, ShapeAndFill) {
  TF t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.dim(2), 4);
  EXPECT_EQ(shape_string(t.shape()), "(2, 3, 4)");
  EXPECT_THROW(TF({2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(TF(Shape{}), ShapeError);
  EXPECT_THROW(TF({1, 1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(TF({2, 0}), ShapeError);
}

TEST(ParameterSetTest, AddGetCount) {
  ParameterSet<float> ps;
  ps.add("a", TF({2, 3}));
  ps.add("b", TF({4}));
  EXPECT_EQ(ps.parameter_count(), 10u);
  EXPECT_TRUE(ps.contains("a"));
  EXPECT_THROW(ps.add("a", TF({1})), std::invalid_argument);
  EXPECT_THROW(ps.get("zzz"), std::out_of_range);
  const auto d = ps.cast<double>();
  EXPECT_EQ(d.entries()[1].name, "b");
}

TD conv_value(const TD& x, const TD& w, const TD& b) {
  ParameterSet<double> ps;
  Graph<double> g(ps);
  return g.value(conv2d(g, g.input(x), g.input(w), g.input(b)));
}

TEST(Conv, IdentityKernel) {
  TD x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  TD w({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  EXPECT_EQ(conv_value(x, w, TD({1})), x);
}

TEST(Conv, OnesKernelSumsNeighbours) {
  TD x({1, 1, 3, 3}, 1.0);
  TD w({1, 1, 3, 3}, 1.0);
  const TD y = conv_value(x, w, TD({1}, {0.5}));
  EXPECT_EQ(y[4], 9.5);
  EXPECT_EQ(y[0], 4.5);
  EXPECT_EQ(y[1], 6.5);
  EXPECT_EQ(y[8], 4.5);
}

TEST(Conv, ChannelMixing) {
  // Two input channels, 1x1 kernel: y = 2*x0 - x1 + 1.
  TD x({1, 2, 1, 2}, {1, 2, 10, 20});
  TD w({1, 2, 1, 1}, {2, -1});
  const TD y = conv_value(x, w, TD({1}, {1.0}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_EQ(y[0], -7.0);
  EXPECT_EQ(y[1], -15.0);
}

TEST(Conv, ShapeErrors) {
  EXPECT_THROW(conv_value(TD({1, 2, 3, 3}), TD({1, 1, 3, 3}), TD({1})), ShapeError);
  EXPECT_THROW(conv_value(TD({1, 1, 3, 3}), TD({1, 1, 2, 2}), TD({1})), ShapeError);
  EXPECT_THROW(conv_value(TD({1, 1, 3, 3}), TD({2, 1, 3, 3}), TD({1})), ShapeError);
}

TEST(Conv, ThreadedMatchesSerial) {
  Rng rng(3);
  ParameterSet<float> ps;
  ps.add("w", testkit::random_tensor(rng, {4, 3, 3, 3}).cast<float>());
  ps.add("b", testkit::random_tensor(rng, {4}).cast<float>());
  const TF x = testkit::random_tensor(rng, {5, 3, 8, 8}).cast<float>();
  const TF target({5, 4, 8, 8}, 0.25f);
  auto run = [&](int threads) {
    ps.zero_grad();
    Graph<float> g(ps, threads);
    auto y = conv2d(g, g.input(x), g.param("w"), g.param("b"));
    g.backward(mse_loss(g, y, target));
    return std::make_pair(g.value(y), ps.get("w").grad);
  };
  const auto a = run(1);
  const auto b = run(4);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Pool, FirstMaximumWins) {
  ParameterSet<double> ps;
  ps.add("x", TD({1, 1, 2, 2}, {3, 1, 3, 2}));
  Graph<double> g(ps);
  auto y = global_max_pool(g, g.param("x"));
  EXPECT_EQ(g.value(y)[0], 3.0);
  g.backward(mse_loss(g, y, TD({1, 1}, {0.0})));
  EXPECT_EQ(ps.get("x").grad.values()[0], 6.0);
  EXPECT_EQ(ps.get("x").grad.values()[2], 0.0);
}

TEST(Mse, HandExamples) {
  ParameterSet<double> ps;
  Graph<double> g(ps);
  EXPECT_EQ(g.value(mse_loss(g, g.input(TD({2}, {1, 3})), TD({2}, {1, 1})))[0], 2.0);
  EXPECT_EQ(g.value(mse_loss(g, g.input(TD({2, 2}, {0, 0, 0, 0})), TD({2, 2}, {1, -1, 2, -2})))[0], 2.5);
  EXPECT_THROW(mse_loss(g, g.input(TD({2})), TD({3})), ShapeError);
}

TEST(Concat, SplitsGradient) {
  ParameterSet<double> ps;
  ps.add("a", TD({1, 2}, {1, 2}));
  ps.add("b", TD({1, 1}, {3}));
  Graph<double> g(ps);
  auto y = concat<double>(g, {g.param("a"), g.param("b")});
  EXPECT_EQ(g.value(y), TD({1, 3}, {1, 2, 3}));
  g.backward(mse_loss(g, y, TD({1, 3}, {0, 0, 0})));
  EXPECT_DOUBLE_EQ(ps.get("a").grad[1], 2.0 * 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(ps.get("b").grad[0], 2.0 * 3.0 / 3.0);
}

TEST(Dense, HandExample) {
  ParameterSet<double> ps;
  Graph<double> g(ps);
  auto y = dense(g, g.input(TD({1, 2}, {1, 2})), g.input(TD({2, 2}, {1, 0, 1, 1})), g.input(TD({2}, {0.5, -1})));
  EXPECT_EQ(g.value(y), TD({1, 2}, {1.5, 2.0}));
}

TEST(Relu, ClampsNegatives) {
  ParameterSet<double> ps;
  Graph<double> g(ps);
  EXPECT_EQ(g.value(relu(g, g.input(TD({3}, {-1, 0, 2})))), TD({3}, {0, 0, 2}));
}

TEST(Graph, BackwardNeedsScalar) {
  ParameterSet<double> ps;
  Graph<double> g(ps);
  EXPECT_THROW(g.backward(g.input(TD({2}))), ShapeError);
}

TEST(Graph, ParamGradAccumulatesOverReuse) {
  ParameterSet<double> ps;
  ps.add("p", TD({1}, {2.0}));
  ps.zero_grad();
  Graph<double> g(ps);
  auto p = g.param("p");
  g.backward(mse_loss(g, add(g, p, p), TD({1}, {0.0})));
  EXPECT_EQ(ps.get("p").grad[0], 16.0);  // d/dp (2p)^2
}

TEST(GradientCheck, EveryLayer) {
  const auto results = testkit::run_layer_gradient_suite(5, 101);
  EXPECT_EQ(results.size(), 8u);
  for (const auto& r : results) EXPECT_LT(r.max_error, testkit::kGradTol) << r.layer;
}

TEST(GradientCheck, ResidualChain) {
  Rng rng(5);
  testkit::ParamsD ps;
  ps.add("x", testkit::random_tensor(rng, {2, 1, 5, 5}));
  ps.add("w1", testkit::random_tensor(rng, {3, 1, 3, 3}));
  ps.add("b1", testkit::random_tensor(rng, {3}, 0.1));
  ps.add("ws", testkit::random_tensor(rng, {3, 1, 1, 1}));
  ps.add("bs", testkit::random_tensor(rng, {3}, 0.1));
  ps.add("wd", testkit::random_tensor(rng, {2, 3}));
  ps.add("bd", testkit::random_tensor(rng, {2}));
  const auto target = testkit::random_tensor(rng, {2, 2});
  const double err = testkit::max_gradient_error(ps, [&](testkit::GraphD& g) {
    auto x = g.param("x");
    auto h = relu(g, conv2d(g, x, g.param("w1"), g.param("b1")));
    auto s = conv2d(g, x, g.param("ws"), g.param("bs"));
    auto p = global_max_pool(g, add(g, h, s));
    return mse_loss(g, dense(g, p, g.param("wd"), g.param("bd")), target);
  });
  EXPECT_LT(err, 1e-4);
}

TEST(AdamTest, ZeroGradientLeavesParameters) {
  ParameterSet<double> ps;
  ps.add("p", TD({3}, {1, 2, 3}));
  ps.zero_grad();
  AdamState<double> adam(ps, {.lr = 0.1});
  adam.step(ps);
  EXPECT_EQ(ps.get("p").value, TD({3}, {1, 2, 3}));
  EXPECT_EQ(adam.steps(), 1);
}

TEST(AdamTest, FirstStepIsLearningRate) {
  ParameterSet<double> ps;
  ps.add("p", TD({2}, {1.0, -1.0}));
  ps.zero_grad();
  ps.get("p").grad = TD({2}, {1.0, -4.0});
  AdamState<double> adam(ps, {.lr = 0.1});
  adam.step(ps);
  EXPECT_NEAR(ps.get("p").value[0], 0.9, 1e-7);
  EXPECT_NEAR(ps.get("p").value[1], -0.9, 1e-7);
  EXPECT_NEAR(adam.first_moment()[0][0], 0.1, 1e-15);
  EXPECT_NEAR(adam.second_moment()[0][1], 0.016, 1e-15);
}

TEST(AdamTest, MinimizesQuadraticBowl) {
  ParameterSet<double> ps;
  ps.add("p", TD({2}, {3.0, -2.0}));
  AdamState<double> adam(ps, {.lr = 0.05});
  const TD target({2}, {0.5, 1.0});
  for (int i = 0; i < 2000; ++i) {
    ps.zero_grad();
    Graph<double> g(ps);
    g.backward(mse_loss(g, g.param("p"), target));
    adam.step(ps);
  }
  EXPECT_NEAR(ps.get("p").value[0], 0.5, 1e-3);
  EXPECT_NEAR(ps.get("p").value[1], 1.0, 1e-3);
}

ParameterSet<float> sample_params() {
  Rng rng(1);
  ParameterSet<float> ps;
  ps.add("conv.w", testkit::random_tensor(rng, {2, 1, 3, 3}).cast<float>());
  ps.add("conv.b", testkit::random_tensor(rng, {2}).cast<float>());
  return ps;
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  TempDir dir;
  KvText manifest;
  manifest.set("variant", std::string("full_meta"));
  const auto ps = sample_params();
  save_checkpoint(dir / "m.ckpt", ps, manifest);
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.manifest.get("variant"), "full_meta");
  ASSERT_EQ(ck.params.entries().size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ck.params.entries()[i].name, ps.entries()[i].name);
    EXPECT_EQ(ck.params.entries()[i].value, ps.entries()[i].value);
  }
  EXPECT_EQ(encode_checkpoint(ck.params, ck.manifest), encode_checkpoint(ps, manifest));
}

TEST(CheckpointTest, DetectsCorruption) {
  const std::string bytes = encode_checkpoint(sample_params(), KvText{});
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
  bad = bytes;
  bad[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/m.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace camnoise::nn
