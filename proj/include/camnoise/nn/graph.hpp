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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "camnoise/nn/tensor.hpp"

namespace camnoise::nn {

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
/// already topologically sorted; backward() walks it from the end.
template <typename T>
class Graph {
 public:
  using Var = std::size_t;
  using BackwardFn = std::function<void(Graph&, Var self)>;

  /// With record = false no backward closures are kept (inference).
  explicit Graph(ParameterSet<T>& params, int threads = 1, bool record = true);

  Var input(Tensor<T> value);
  /// Leaf bound to a named parameter; its gradient is added to the parameter
  /// set at the end of backward().
  Var param(const std::string& name);
  Var push(Tensor<T> value, BackwardFn backward);

  const Tensor<T>& value(Var v) const { return nodes_.at(v).value; }
  /// Gradient buffer of v, zero-initialized on first access.
  Tensor<T>& grad(Var v);
  bool has_grad(Var v) const { return !nodes_.at(v).grad.shape().empty(); }

  /// Seeds d(root)/d(root) = 1; root must hold a single value.
  void backward(Var root);

  int threads() const { return threads_; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    typename ParameterSet<T>::Entry* param = nullptr;
  };
  ParameterSet<T>& params_;
  int threads_;
  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace camnoise::nn
