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

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camnoise::nn {

using Shape = std::vector<int>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// 64-byte aligned storage, so vectorized reductions split the same way on
/// every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

/// Dense row-major tensor of rank 1..4: (batch, channels, height, width) or
/// (batch, features).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  void fill(T v);

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

/// Throws ShapeError naming `what` and both shapes when they differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Named trainable tensors in insertion order, each with a gradient buffer of
/// the same shape.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const;
  Entry& get(const std::string& name);
  const Entry& get(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;
  void zero_grad();

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace camnoise::nn
