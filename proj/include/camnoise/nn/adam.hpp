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

#include <vector>

#include "camnoise/nn/tensor.hpp"

namespace camnoise::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers follow the parameter set's
/// entry order and shapes.
template <typename T>
class AdamState {
 public:
  AdamState(const ParameterSet<T>& params, AdamConfig config = {});

  /// Applies one update from the gradients stored in `params`.
  void step(ParameterSet<T>& params);

  long long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

extern template class AdamState<float>;
extern template class AdamState<double>;

}  // namespace camnoise::nn
