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
#include <span>
#include <vector>

namespace camnoise {

/// Row-major single-channel grid of real intensities. Patches, full frames and
/// resampled noise images all use this type; only patches are constrained to
/// the 8-bit DN range.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);
  Image(int width, int height, std::vector<float> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  double mean() const;
  /// Population standard deviation.
  double stddev() const;
  float min_value() const;
  float max_value() const;

  Image crop(int x0, int y0, int w, int h) const;

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

using Patch = Image;

inline constexpr float kMaxDn = 255.0f;

/// Clamp every value to [lo, hi].
void clip(Image& image, float lo = 0.0f, float hi = kMaxDn);
/// Round half to even, then clamp to [0, 255].
void quantize_8bit(Image& image);

/// Throws std::domain_error when any value lies outside [0, 255] or is not
/// finite.
void validate_patch(const Patch& patch);

}  // namespace camnoise
