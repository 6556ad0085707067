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

// Patch-level noise estimators: a residual trunk shared by up to four branch
// heads (PN, DCSN, RN and residual xi), optionally fed with camera metadata.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "camnoise/dataset.hpp"
#include "camnoise/kv_text.hpp"
#include "camnoise/metadata.hpp"
#include "camnoise/nn/checkpoint.hpp"
#include "camnoise/nn/graph.hpp"
#include "camnoise/noise_model.hpp"

namespace camnoise {

enum class Variant { DrneCust, WithoutMeta, MinMeta, FullMeta };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view text);

struct ModelVariant {
  Variant kind = Variant::FullMeta;
  double scale = 1.0;   // channel width multiplier on the 64-channel trunk
  int patch_size = 128;

  int channels() const;
  bool uses_metadata() const { return kind == Variant::MinMeta || kind == Variant::FullMeta; }
  bool has_branches() const { return kind != Variant::DrneCust; }
};

/// Throws std::domain_error for scale <= 0 or patch_size < 16.
void validate_variant(const ModelVariant& v);

inline constexpr double kDefaultXiMax = 20.0;  // DN
inline constexpr int kTrunkBlocks = 2;
inline constexpr int kConvsPerBlock = 5;
inline constexpr std::array<int, 3> kFcbWidths{32, 16, 8};

/// Pixel values are multiplied by this before entering the trunk.
inline constexpr float kInputScale = 1.0f / 255.0f;

/// Every variable field min-max normalized over its range, in MetaField order.
using MetadataVector = std::array<double, kNumMetaFields>;

/// Throws std::domain_error when a field lies outside its range.
MetadataVector normalize_metadata(const CameraMetadata& meta);

/// Fault-tolerant form: out-of-range fields are clamped to [0, 1] and
/// `clamped` (if given) is set.
MetadataVector normalize_metadata_clamped(const CameraMetadata& meta, bool* clamped = nullptr);

/// Fields fed to the PN, DCSN and RN heads.
const std::array<std::vector<MetaField>, 3>& branch_fields(Variant v);

struct BranchMetadata {
  std::vector<double> pn;
  std::vector<double> dcsn;
  std::vector<double> rn;
};

BranchMetadata route_metadata(const MetadataVector& vec, Variant v);

struct LayerShape {
  std::string name;
  nn::Shape shape;

  bool operator==(const LayerShape&) const = default;
};

/// Builds the forward pass on `g` using the parameters bound to it. `input` is
/// (N, 1, P, P); `meta` holds one entry per sample for metadata variants and
/// is ignored otherwise. Returns (N, 1) for DrneCust and (N, 4) ordered
/// pn, dcsn, rn, xi / xi_max for the branch variants.
template <typename T>
typename nn::Graph<T>::Var forward(nn::Graph<T>& g, const ModelVariant& variant, typename nn::Graph<T>::Var input,
                                   std::span<const BranchMetadata> meta, std::vector<LayerShape>* trace = nullptr);

extern template nn::Graph<float>::Var forward<float>(nn::Graph<float>&, const ModelVariant&, nn::Graph<float>::Var,
                                                     std::span<const BranchMetadata>, std::vector<LayerShape>*);
extern template nn::Graph<double>::Var forward<double>(nn::Graph<double>&, const ModelVariant&,
                                                       nn::Graph<double>::Var, std::span<const BranchMetadata>,
                                                       std::vector<LayerShape>*);

/// Parameter tensors with He-uniform weights and zero biases.
template <typename T>
nn::ParameterSet<T> init_parameters(const ModelVariant& variant, std::uint64_t seed);

extern template nn::ParameterSet<float> init_parameters<float>(const ModelVariant&, std::uint64_t);
extern template nn::ParameterSet<double> init_parameters<double>(const ModelVariant&, std::uint64_t);

class Model {
 public:
  Model(ModelVariant variant, nn::ParameterSet<float> params, double xi_max = kDefaultXiMax);

  static Model build(const ModelVariant& variant, std::uint64_t seed, double xi_max = kDefaultXiMax);

  const ModelVariant& variant() const { return variant_; }
  double xi_max() const { return xi_max_; }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }

  /// variant, scale, patch_size, xi_max, input_scale, metadata field order.
  KvText manifest() const;
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
  static Model from_checkpoint(nn::Checkpoint checkpoint);

 private:
  ModelVariant variant_;
  double xi_max_;
  nn::ParameterSet<float> params_;
};

/// (N, 1, P, P) input tensor scaled by kInputScale.
template <typename T>
nn::Tensor<T> make_input_batch(std::span<const Patch> patches, int patch_size);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-4;
  int threads = 1;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(long long step, const std::string& what) : std::runtime_error(what), step_(step) {}
  long long step() const { return step_; }

 private:
  long long step_;
};

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;  // mean per-sample loss over each epoch
};

/// Per-sample regression target: pn, dcsn, rn in DN and clamp(xi / xi_max,
/// -1, 1); DrneCust regresses the quadrature source total only.
std::vector<float> training_target(const TrainingRecord& record, Variant v, double xi_max);

/// Joint MSE with Adam. Records are shuffled every epoch from `seed`; the
/// trailing partial batch is kept. `on_epoch(epoch, loss)` runs after each
/// epoch when set.
TrainResult train(const ModelVariant& variant, std::span<const TrainingRecord> records, const TrainConfig& config,
                  std::uint64_t seed, double xi_max = kDefaultXiMax,
                  const std::function<void(int, double)>& on_epoch = {});

/// Continues training an existing model in place.
std::vector<double> train_model(Model& model, std::span<const TrainingRecord> records, const TrainConfig& config,
                                std::uint64_t seed, const std::function<void(int, double)>& on_epoch = {});

struct Estimate {
  NoiseLevels levels;
  std::vector<double> raw;        // head outputs before denormalization and clamping
  bool total_only = false;        // DrneCust: only levels.sigma_total is set
  bool metadata_clamped = false;  // some metadata field was outside its range
};

/// Single patch. Metadata is required for MinMeta / FullMeta and ignored
/// otherwise. Per-source outputs are clamped at 0; sigma_total is composed.
Estimate estimate(const Model& model, const Patch& patch, const std::optional<CameraMetadata>& meta);

/// `metas` is empty or holds one entry per patch.
std::vector<Estimate> estimate_batch(const Model& model, std::span<const Patch> patches,
                                     std::span<const CameraMetadata> metas, int threads = 1);

struct ImageEstimate {
  std::vector<Estimate> patches;
  NoiseLevels mean;  // component-wise arithmetic mean over patches
  bool total_only = false;
};

ImageEstimate estimate_image(const Model& model, const Image& image, const std::optional<CameraMetadata>& meta,
                             int threads = 1);

}  // namespace camnoise
