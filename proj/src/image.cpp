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

#include "camnoise/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace camnoise {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::domain_error("negative image size");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> values)
    : width_(width), height_(height), data_(std::move(values)) {
  if (width < 0 || height < 0) throw std::domain_error("negative image size");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw std::domain_error("image buffer size " + std::to_string(data_.size()) + " != " +
                            std::to_string(width) + "x" + std::to_string(height));
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  double sum = 0.0;
  for (float v : data_) sum += v;
  return sum / static_cast<double>(data_.size());
}

double Image::stddev() const {
  if (data_.empty()) return 0.0;
  const double mu = mean();
  double acc = 0.0;
  for (float v : data_) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(data_.size()));
}

float Image::min_value() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }

float Image::max_value() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

Image Image::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_)
    throw std::domain_error("crop window outside image");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(data_.begin() + static_cast<std::size_t>(y0 + y) * width_ + x0, w,
                out.data_.begin() + static_cast<std::size_t>(y) * w);
  return out;
}

void clip(Image& image, float lo, float hi) {
  for (float& v : image.values()) v = std::clamp(v, lo, hi);
}

void quantize_8bit(Image& image) {
  // nearbyint under the default FE_TONEAREST mode rounds half to even.
  for (float& v : image.values()) v = std::clamp(std::nearbyint(v), 0.0f, kMaxDn);
}

void validate_patch(const Patch& patch) {
  for (float v : patch.values())
    if (!std::isfinite(v) || v < 0.0f || v > kMaxDn)
      throw std::domain_error("patch intensity outside [0, 255]");
}

}  // namespace camnoise
