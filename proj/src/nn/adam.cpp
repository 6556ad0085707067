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

#include "camnoise/nn/adam.hpp"

#include <cmath>

namespace camnoise::nn {

template <typename T>
AdamState<T>::AdamState(const ParameterSet<T>& params, AdamConfig config) : config_(config) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.value.size(), 0.0);
    v_.emplace_back(e.value.size(), 0.0);
  }
}

template <typename T>
void AdamState<T>::step(ParameterSet<T>& params) {
  auto& entries = params.entries();
  if (entries.size() != m_.size())
    throw ShapeError("adam: parameter set has " + std::to_string(entries.size()) + " tensors, state has " +
                     std::to_string(m_.size()));
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto value = entries[p].value.values();
    const auto grad = entries[p].grad.values();
    if (value.size() != m_[p].size())
      throw ShapeError("adam: parameter " + entries[p].name + " changed shape to " +
                       shape_string(entries[p].value.shape()));
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] = static_cast<T>(value[i] - config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
}

template class AdamState<float>;
template class AdamState<double>;

}  // namespace camnoise::nn
