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

#include "camnoise/nn/tensor.hpp"

#include <algorithm>

namespace camnoise::nn {

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4) throw ShapeError("tensor rank must be 1..4, got " + shape_string(shape_));
  for (int d : shape_)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_.empty() || shape_.size() > 4) throw ShapeError("tensor rank must be 1..4, got " + shape_string(shape_));
  for (int d : shape_)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("buffer of " + std::to_string(data_.size()) + " values does not fit " + shape_string(shape_));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T>& ParameterSet<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  Tensor<T> grad(value.shape());
  entries_.push_back({name, std::move(value), std::move(grad)});
  return entries_.back().value;
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

template <typename T>
typename ParameterSet<T>::Entry& ParameterSet<T>::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e;
  throw std::out_of_range("unknown parameter " + name);
}

template <typename T>
const typename ParameterSet<T>::Entry& ParameterSet<T>::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw std::out_of_range("unknown parameter " + name);
}

template <typename T>
std::size_t ParameterSet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.grad.fill(T(0));
}

template class Tensor<float>;
template class Tensor<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace camnoise::nn
