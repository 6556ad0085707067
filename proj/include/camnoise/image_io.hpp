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

#include <filesystem>
#include <stdexcept>

#include "camnoise/image.hpp"

namespace camnoise {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedImage {
  Image image;    // values in native DN (0..maxval)
  int bit_depth;  // 8 or 16 (PGM may report any maxval; depth = bits needed)
};

/// Binary PGM (P5), maxval up to 65535. 16-bit samples are big-endian.
LoadedImage read_pgm(const std::filesystem::path& path);
/// Writes rounded, clamped values. bit_depth 8 or 16.
void write_pgm(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// Grayscale PNG, 8 or 16 bit.
LoadedImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// Dispatches on extension (.pgm / .png).
LoadedImage read_image(const std::filesystem::path& path);

}  // namespace camnoise
