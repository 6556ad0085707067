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

#include "camnoise/nn/graph.hpp"

#include <algorithm>

namespace camnoise::nn {

template <typename T>
Graph<T>::Graph(ParameterSet<T>& params, int threads, bool record)
    : params_(params), threads_(std::max(1, threads)), record_(record) {}

template <typename T>
typename Graph<T>::Var Graph<T>::input(Tensor<T> value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr});
  return nodes_.size() - 1;
}

template <typename T>
typename Graph<T>::Var Graph<T>::param(const std::string& name) {
  auto& entry = params_.get(name);
  nodes_.push_back({entry.value, {}, {}, &entry});
  return nodes_.size() - 1;
}

template <typename T>
typename Graph<T>::Var Graph<T>::push(Tensor<T> value, BackwardFn backward) {
  nodes_.push_back({std::move(value), {}, record_ ? std::move(backward) : BackwardFn{}, nullptr});
  return nodes_.size() - 1;
}

template <typename T>
Tensor<T>& Graph<T>::grad(Var v) {
  Node& n = nodes_.at(v);
  if (n.grad.shape().empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var root) {
  if (!record_) throw std::logic_error("backward on a graph built without recording");
  if (value(root).size() != 1) throw ShapeError("backward root must be scalar, got " + shape_string(value(root).shape()));
  grad(root).fill(T(1));
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && has_grad(i)) n.backward(*this, i);
  }
  for (std::size_t i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (!n.param || !has_grad(i)) continue;
    auto dst = n.param->grad.values();
    auto src = n.grad.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace camnoise::nn
