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

#include "camnoise/nn/graph.hpp"

namespace camnoise::nn {

/// Stride-1 cross-correlation with zero "same" padding. x (N, C, H, W),
/// w (O, C, k, k) with odd k, b (O) -> (N, O, H, W).
template <typename T>
typename Graph<T>::Var conv2d(Graph<T>& g, typename Graph<T>::Var x, typename Graph<T>::Var w,
                              typename Graph<T>::Var b);

template <typename T>
typename Graph<T>::Var relu(Graph<T>& g, typename Graph<T>::Var x);

template <typename T>
typename Graph<T>::Var add(Graph<T>& g, typename Graph<T>::Var a, typename Graph<T>::Var b);

/// (N, C, H, W) -> (N, C). Ties go to the first position in row-major order.
template <typename T>
typename Graph<T>::Var global_max_pool(Graph<T>& g, typename Graph<T>::Var x);

/// Joins rank-2 tensors with equal batch size along the feature axis.
template <typename T>
typename Graph<T>::Var concat(Graph<T>& g, const std::vector<typename Graph<T>::Var>& parts);

/// x (N, I), w (O, I), b (O) -> (N, O).
template <typename T>
typename Graph<T>::Var dense(Graph<T>& g, typename Graph<T>::Var x, typename Graph<T>::Var w,
                             typename Graph<T>::Var b);

/// Mean of squared differences over all elements; returns shape (1).
template <typename T>
typename Graph<T>::Var mse_loss(Graph<T>& g, typename Graph<T>::Var pred, const Tensor<T>& target);

}  // namespace camnoise::nn
