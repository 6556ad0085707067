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

#include "camnoise/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camnoise/nn/adam.hpp"
#include "camnoise/nn/ops.hpp"
#include "camnoise/rng.hpp"

namespace camnoise {

namespace {

constexpr std::array<std::string_view, 4> kVariantNames{"drne_cust", "without_meta", "min_meta", "full_meta"};
constexpr std::array<std::string_view, 4> kHeadNames{"pn", "dcsn", "rn", "xi"};
constexpr std::size_t kInferenceChunk = 64;

std::string conv_name(int block, int layer) {
  return "trunk.b" + std::to_string(block) + ".conv" + std::to_string(layer);
}

std::string fc_name(std::string_view head, int layer) {
  return "head." + std::string(head) + ".fc" + std::to_string(layer);
}

int meta_width(const ModelVariant& v, int branch) {
  return static_cast<int>(branch_fields(v.kind)[static_cast<std::size_t>(branch)].size());
}

/// (name, input width) for every head, in parameter order.
std::vector<std::pair<std::string, int>> heads(const ModelVariant& v) {
  const int c = v.channels();
  if (!v.has_branches()) return {{"total", c}};
  return {{"pn", c + meta_width(v, 0)}, {"dcsn", c + meta_width(v, 1)}, {"rn", c + meta_width(v, 2)}, {"xi", c + 3}};
}

}  // namespace

std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant variant_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == text) return static_cast<Variant>(i);
  throw std::invalid_argument("unknown variant '" + std::string(text) +
                              "' (expected drne_cust, without_meta, min_meta or full_meta)");
}

int ModelVariant::channels() const { return std::max(1, static_cast<int>(std::lround(64.0 * scale))); }

void validate_variant(const ModelVariant& v) {
  if (!(v.scale > 0.0) || !std::isfinite(v.scale)) throw std::domain_error("variant scale must be positive");
  if (v.patch_size < 16) throw std::domain_error("patch size must be at least 16");
}

MetadataVector normalize_metadata(const CameraMetadata& meta) {
  bool clamped = false;
  MetadataVector v = normalize_metadata_clamped(meta, &clamped);
  if (clamped) validate_ranges(meta);  // throws with the offending field
  return v;
}

MetadataVector normalize_metadata_clamped(const CameraMetadata& meta, bool* clamped) {
  MetadataVector v{};
  bool any = false;
  for (std::size_t i = 0; i < kNumMetaFields; ++i) {
    const auto& info = kMetaFields[i];
    const double x = get_field(meta, info.field);
    double n = (x - info.min) / (info.max - info.min);
    if (!std::isfinite(n)) throw std::domain_error("metadata field " + std::string(info.name) + " is not finite");
    if (n < 0.0 || n > 1.0) {
      any = true;
      n = std::clamp(n, 0.0, 1.0);
    }
    v[i] = n;
  }
  if (clamped) *clamped = any;
  return v;
}

const std::array<std::vector<MetaField>, 3>& branch_fields(Variant v) {
  using F = MetaField;
  static const std::array<std::vector<MetaField>, 3> full{{
      {F::CameraGain, F::FullWellCapacity},
      {F::CameraGain, F::ExposureTime, F::SensorTemperature, F::DarkSignalFom, F::SensorPixelSize},
      {F::CameraGain, F::PixelClockRate, F::SenseNodeGain, F::SenseNodeResetFactor, F::ThermalWhiteNoise},
  }};
  static const std::array<std::vector<MetaField>, 3> minimal{{
      {F::CameraGain, F::ExposureTime, F::SensorTemperature},
      {F::CameraGain, F::ExposureTime, F::SensorTemperature},
      {F::CameraGain, F::ExposureTime, F::SensorTemperature},
  }};
  static const std::array<std::vector<MetaField>, 3> none{};
  switch (v) {
    case Variant::FullMeta: return full;
    case Variant::MinMeta: return minimal;
    default: return none;
  }
}

BranchMetadata route_metadata(const MetadataVector& vec, Variant v) {
  const auto& fields = branch_fields(v);
  BranchMetadata out;
  std::array<std::vector<double>*, 3> dst{&out.pn, &out.dcsn, &out.rn};
  for (std::size_t b = 0; b < 3; ++b)
    for (MetaField f : fields[b]) dst[b]->push_back(vec[static_cast<std::size_t>(f)]);
  return out;
}

template <typename T>
nn::ParameterSet<T> init_parameters(const ModelVariant& variant, std::uint64_t seed) {
  validate_variant(variant);
  nn::ParameterSet<T> params;
  std::uint64_t stream = 0;
  auto add = [&](const std::string& name, nn::Shape wshape, int fan_in) {
    nn::Tensor<T> w(wshape);
    Rng rng(derive_seed(seed, stream++));
    const double bound = std::sqrt(6.0 / fan_in);
    for (T& x : w.values()) x = static_cast<T>(rng.uniform(-bound, bound));
    params.add(name + ".w", std::move(w));
    params.add(name + ".b", nn::Tensor<T>({wshape[0]}));
  };
  const int c = variant.channels();
  for (int b = 0; b < kTrunkBlocks; ++b) {
    for (int l = 0; l < kConvsPerBlock; ++l) {
      const int in = (b == 0 && l == 0) ? 1 : c;
      add(conv_name(b, l), {c, in, 3, 3}, in * 9);
    }
  }
  add("trunk.b0.skip", {c, 1, 1, 1}, 1);
  for (const auto& [head, width] : heads(variant)) {
    int in = width;
    for (int l = 0; l < 3; ++l) {
      add(fc_name(head, l), {kFcbWidths[static_cast<std::size_t>(l)], in}, in);
      in = kFcbWidths[static_cast<std::size_t>(l)];
    }
    add(fc_name(head, 3), {1, in}, in);
  }
  return params;
}

template <typename T>
typename nn::Graph<T>::Var forward(nn::Graph<T>& g, const ModelVariant& variant, typename nn::Graph<T>::Var input,
                                   std::span<const BranchMetadata> meta, std::vector<LayerShape>* trace) {
  using Var = typename nn::Graph<T>::Var;
  const auto& in_shape = g.value(input).shape();
  if (in_shape.size() != 4 || in_shape[1] != 1 || in_shape[2] != variant.patch_size ||
      in_shape[3] != variant.patch_size)
    throw nn::ShapeError("model input must be (N, 1, " + std::to_string(variant.patch_size) + ", " +
                         std::to_string(variant.patch_size) + "), got " + nn::shape_string(in_shape));
  const int n = in_shape[0];
  auto record = [&](const std::string& name, Var v) {
    if (trace) trace->push_back({name, g.value(v).shape()});
  };
  auto conv = [&](const std::string& name, Var x) {
    return nn::conv2d(g, x, g.param(name + ".w"), g.param(name + ".b"));
  };

  Var x = input;
  for (int b = 0; b < kTrunkBlocks; ++b) {
    Var skip = b == 0 ? conv("trunk.b0.skip", x) : x;
    Var h = x;
    for (int l = 0; l < kConvsPerBlock; ++l) {
      h = nn::relu(g, conv(conv_name(b, l), h));
      record("block" + std::to_string(b) + ".conv" + std::to_string(l), h);
    }
    x = nn::add(g, h, skip);
    record("block" + std::to_string(b) + ".out", x);
  }
  Var pooled = nn::global_max_pool(g, x);
  record("pool", pooled);

  auto fcb = [&](const std::string& head, Var in) {
    Var h = in;
    for (int l = 0; l < 3; ++l) {
      const std::string name = fc_name(head, l);
      h = nn::relu(g, nn::dense(g, h, g.param(name + ".w"), g.param(name + ".b")));
      record(head + ".fc" + std::to_string(l), h);
    }
    const std::string name = fc_name(head, 3);
    h = nn::dense(g, h, g.param(name + ".w"), g.param(name + ".b"));
    record(head + ".out", h);
    return h;
  };

  if (!variant.has_branches()) {
    Var out = fcb("total", pooled);
    record("output", out);
    return out;
  }

  if (variant.uses_metadata() && meta.size() != static_cast<std::size_t>(n))
    throw std::domain_error("metadata required for every sample: got " + std::to_string(meta.size()) + " for " +
                            std::to_string(n) + " patches");
  auto meta_input = [&](int branch) {
    const int w = meta_width(variant, branch);
    nn::Tensor<T> t({n, w});
    for (int s = 0; s < n && w > 0; ++s) {
      const auto& m = meta[static_cast<std::size_t>(s)];
      const std::vector<double>& src = branch == 0 ? m.pn : branch == 1 ? m.dcsn : m.rn;
      if (static_cast<int>(src.size()) != w)
        throw nn::ShapeError("branch metadata width " + std::to_string(src.size()) + ", expected " + std::to_string(w));
      for (int j = 0; j < w; ++j) t[static_cast<std::size_t>(s) * w + j] = static_cast<T>(src[static_cast<std::size_t>(j)]);
    }
    return g.input(std::move(t));
  };

  std::vector<Var> outs;
  for (int branch = 0; branch < 3; ++branch) {
    const std::string head(kHeadNames[static_cast<std::size_t>(branch)]);
    record(head + ".pool", pooled);
    Var in = pooled;
    if (meta_width(variant, branch) > 0) in = nn::concat(g, std::vector<Var>{pooled, meta_input(branch)});
    record(head + ".concat", in);
    outs.push_back(fcb(head, in));
  }
  record("xi.pool", pooled);
  Var xi_in = nn::concat(g, std::vector<Var>{pooled, outs[0], outs[1], outs[2]});
  record("xi.concat", xi_in);
  outs.push_back(fcb("xi", xi_in));
  Var out = nn::concat(g, outs);
  record("output", out);
  return out;
}

template <typename T>
nn::Tensor<T> make_input_batch(std::span<const Patch> patches, int patch_size) {
  nn::Tensor<T> t({static_cast<int>(patches.size()), 1, patch_size, patch_size});
  const std::size_t area = static_cast<std::size_t>(patch_size) * patch_size;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Patch& p = patches[i];
    if (p.width() != patch_size || p.height() != patch_size)
      throw std::domain_error("patch is " + std::to_string(p.width()) + "x" + std::to_string(p.height()) +
                              ", model expects " + std::to_string(patch_size) + "x" + std::to_string(patch_size));
    const auto v = p.values();
    for (std::size_t k = 0; k < area; ++k) t[i * area + k] = static_cast<T>(v[k] * kInputScale);
  }
  return t;
}

Model::Model(ModelVariant variant, nn::ParameterSet<float> params, double xi_max)
    : variant_(variant), xi_max_(xi_max), params_(std::move(params)) {
  validate_variant(variant_);
  if (!(xi_max_ > 0.0)) throw std::domain_error("xi_max must be positive");
  const auto expected = init_parameters<float>(variant_, 0);
  if (expected.entries().size() != params_.entries().size())
    throw nn::ShapeError("parameter set does not match variant " + std::string(to_string(variant_.kind)));
  for (std::size_t i = 0; i < expected.entries().size(); ++i) {
    const auto& e = expected.entries()[i];
    const auto& p = params_.entries()[i];
    if (e.name != p.name) throw nn::ShapeError("parameter " + std::to_string(i) + " is " + p.name + ", expected " + e.name);
    nn::require_same_shape(p.value.shape(), e.value.shape(), p.name.c_str());
  }
}

Model Model::build(const ModelVariant& variant, std::uint64_t seed, double xi_max) {
  return Model(variant, init_parameters<float>(variant, seed), xi_max);
}

KvText Model::manifest() const {
  KvText kv;
  kv.set("variant", std::string(to_string(variant_.kind)));
  kv.set("scale", variant_.scale);
  kv.set("patch_size", static_cast<long long>(variant_.patch_size));
  kv.set("xi_max", xi_max_);
  kv.set("input_scale", static_cast<double>(kInputScale));
  std::string order;
  for (const auto& f : kMetaFields) order += (order.empty() ? "" : ",") + std::string(f.name);
  kv.set("metadata_fields", order);
  return kv;
}

void Model::save(const std::filesystem::path& path) const { nn::save_checkpoint(path, params_, manifest()); }

Model Model::load(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)); }

Model Model::from_checkpoint(nn::Checkpoint ck) {
  ModelVariant v;
  try {
    v.kind = variant_from_string(ck.manifest.get("variant"));
    v.scale = ck.manifest.get_double("scale");
    v.patch_size = static_cast<int>(ck.manifest.get_int("patch_size"));
  } catch (const std::exception& e) {
    throw nn::CheckpointError(std::string("checkpoint manifest: ") + e.what());
  }
  const std::string order = ck.manifest.contains("metadata_fields") ? ck.manifest.get("metadata_fields") : "";
  std::string expected;
  for (const auto& f : kMetaFields) expected += (expected.empty() ? "" : ",") + std::string(f.name);
  if (order != expected) throw nn::CheckpointError("checkpoint metadata field order differs: " + order);
  return Model(v, std::move(ck.params), ck.manifest.get_double("xi_max"));
}

std::vector<float> training_target(const TrainingRecord& r, Variant v, double xi_max) {
  if (v == Variant::DrneCust) return {static_cast<float>(r.truth.source_total())};
  return {static_cast<float>(r.truth.sigma_pn), static_cast<float>(r.truth.sigma_dcsn),
          static_cast<float>(r.truth.sigma_rn), static_cast<float>(std::clamp(r.truth.xi / xi_max, -1.0, 1.0))};
}

std::vector<double> train_model(Model& model, std::span<const TrainingRecord> records, const TrainConfig& config,
                                std::uint64_t seed, const std::function<void(int, double)>& on_epoch) {
  if (records.empty()) throw std::domain_error("training set is empty");
  if (config.epochs < 1 || config.batch_size < 1) throw std::domain_error("epochs and batch_size must be positive");
  const ModelVariant& variant = model.variant();
  nn::AdamState<float> adam(model.params(), {config.lr});

  std::vector<BranchMetadata> routed(records.size());
  if (variant.uses_metadata())
    for (std::size_t i = 0; i < records.size(); ++i)
      routed[i] = route_metadata(normalize_metadata_clamped(records[i].meta_fed), variant.kind);
  const int out_width = variant.has_branches() ? 4 : 1;

  std::vector<std::size_t> order(records.size());
  std::vector<double> losses;
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const int n = static_cast<int>(end - start);
      std::vector<Patch> patches;
      std::vector<BranchMetadata> meta;
      nn::Tensor<float> target({n, out_width});
      for (std::size_t k = start; k < end; ++k) {
        const auto& r = records[order[k]];
        patches.push_back(r.noisy);
        if (variant.uses_metadata()) meta.push_back(routed[order[k]]);
        const auto t = training_target(r, variant.kind, model.xi_max());
        std::copy(t.begin(), t.end(), target.data() + (k - start) * static_cast<std::size_t>(out_width));
      }
      model.params().zero_grad();
      nn::Graph<float> g(model.params(), config.threads);
      auto x = g.input(make_input_batch<float>(patches, variant.patch_size));
      auto out = forward<float>(g, variant, x, meta);
      auto loss = nn::mse_loss(g, out, target);
      const double value = g.value(loss)[0];
      ++step;
      if (!std::isfinite(value))
        throw TrainingDiverged(step, "training diverged at step " + std::to_string(step) + " (epoch " +
                                         std::to_string(epoch + 1) + "): loss is not finite");
      g.backward(loss);
      adam.step(model.params());
      epoch_sum += value * n;
    }
    losses.push_back(epoch_sum / static_cast<double>(records.size()));
    if (on_epoch) on_epoch(epoch + 1, losses.back());
  }
  return losses;
}

TrainResult train(const ModelVariant& variant, std::span<const TrainingRecord> records, const TrainConfig& config,
                  std::uint64_t seed, double xi_max, const std::function<void(int, double)>& on_epoch) {
  Model model = Model::build(variant, derive_seed(seed, 0x1417), xi_max);
  auto losses = train_model(model, records, config, derive_seed(seed, 0x5e1f), on_epoch);
  return {std::move(model), std::move(losses)};
}

std::vector<Estimate> estimate_batch(const Model& model, std::span<const Patch> patches,
                                     std::span<const CameraMetadata> metas, int threads) {
  const ModelVariant& variant = model.variant();
  if (variant.uses_metadata() && metas.size() != patches.size())
    throw std::domain_error(std::string(to_string(variant.kind)) + " requires camera metadata for every patch");
  if (!metas.empty() && metas.size() != patches.size())
    throw std::domain_error("metadata count does not match patch count");

  std::vector<Estimate> out;
  out.reserve(patches.size());
  auto& params = const_cast<nn::ParameterSet<float>&>(model.params());  // read-only: graph never writes params
  for (std::size_t start = 0; start < patches.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(patches.size(), start + kInferenceChunk);
    std::vector<BranchMetadata> meta;
    std::vector<bool> clamped(end - start, false);
    if (variant.uses_metadata()) {
      for (std::size_t i = start; i < end; ++i) {
        bool c = false;
        meta.push_back(route_metadata(normalize_metadata_clamped(metas[i], &c), variant.kind));
        clamped[i - start] = c;
      }
    }
    nn::Graph<float> g(params, threads, false);
    auto x = g.input(make_input_batch<float>(patches.subspan(start, end - start), variant.patch_size));
    auto y = forward<float>(g, variant, x, meta);
    const auto& v = g.value(y);
    const int width = v.dim(1);
    for (std::size_t i = 0; i < end - start; ++i) {
      Estimate e;
      for (int j = 0; j < width; ++j) e.raw.push_back(v[i * static_cast<std::size_t>(width) + j]);
      e.metadata_clamped = clamped[i];
      if (!variant.has_branches()) {
        e.total_only = true;
        e.levels.sigma_total = std::max(0.0, e.raw[0]);
      } else {
        e.levels = NoiseLevels::compose(std::max(0.0, e.raw[0]), std::max(0.0, e.raw[1]), std::max(0.0, e.raw[2]),
                                        e.raw[3] * model.xi_max());
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

Estimate estimate(const Model& model, const Patch& patch, const std::optional<CameraMetadata>& meta) {
  if (model.variant().uses_metadata() && !meta)
    throw std::domain_error(std::string(to_string(model.variant().kind)) + " requires camera metadata");
  std::vector<CameraMetadata> metas;
  if (meta) metas.push_back(*meta);
  return estimate_batch(model, std::span<const Patch>(&patch, 1), metas, 1).front();
}

ImageEstimate estimate_image(const Model& model, const Image& image, const std::optional<CameraMetadata>& meta,
                             int threads) {
  if (model.variant().uses_metadata() && !meta)
    throw std::domain_error(std::string(to_string(model.variant().kind)) + " requires camera metadata");
  const auto tiles = tile_image(image, model.variant().patch_size);
  std::vector<CameraMetadata> metas;
  if (meta) metas.assign(tiles.size(), *meta);
  ImageEstimate out;
  out.patches = estimate_batch(model, tiles, metas, threads);
  out.total_only = !model.variant().has_branches();
  for (const auto& e : out.patches) {
    out.mean.sigma_pn += e.levels.sigma_pn;
    out.mean.sigma_dcsn += e.levels.sigma_dcsn;
    out.mean.sigma_rn += e.levels.sigma_rn;
    out.mean.xi += e.levels.xi;
    out.mean.sigma_total += e.levels.sigma_total;
  }
  const double n = static_cast<double>(out.patches.size());
  out.mean.sigma_pn /= n;
  out.mean.sigma_dcsn /= n;
  out.mean.sigma_rn /= n;
  out.mean.xi /= n;
  out.mean.sigma_total /= n;
  return out;
}

template nn::Graph<float>::Var forward<float>(nn::Graph<float>&, const ModelVariant&, nn::Graph<float>::Var,
                                              std::span<const BranchMetadata>, std::vector<LayerShape>*);
template nn::Graph<double>::Var forward<double>(nn::Graph<double>&, const ModelVariant&, nn::Graph<double>::Var,
                                                std::span<const BranchMetadata>, std::vector<LayerShape>*);
template nn::ParameterSet<float> init_parameters<float>(const ModelVariant&, std::uint64_t);
template nn::ParameterSet<double> init_parameters<double>(const ModelVariant&, std::uint64_t);
template nn::Tensor<float> make_input_batch<float>(std::span<const Patch>, int);
template nn::Tensor<double> make_input_batch<double>(std::span<const Patch>, int);

}  // namespace camnoise
