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

#include "camnoise/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace camnoise {

namespace {

int bits_for(int maxval) {
  int bits = 1;
  while ((1 << bits) - 1 < maxval) ++bits;
  return bits;
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_positive(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw ImageIoError(std::string("PGM: bad ") + what + " '" + tok + "'");
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

LoadedImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw ImageIoError(path.string() + ": not a binary PGM (P5)");
  const int w = parse_positive(pgm_token(in), "width");
  const int h = parse_positive(pgm_token(in), "height");
  const int maxval = parse_positive(pgm_token(in), "maxval");
  if (maxval > 65535) throw ImageIoError(path.string() + ": maxval > 65535");
  // pgm_token consumed the single whitespace byte after maxval.
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw ImageIoError(path.string() + ": truncated pixel data");
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = bytes == 1 ? raw[i] : static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return {Image(w, h, std::move(values)), bits_for(maxval)};
}

void write_pgm(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageIoError("PGM bit depth must be 8 or 16");
  const int maxval = bit_depth == 8 ? 255 : 65535;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << "P5\n" << image.width() << " " << image.height() << "\n" << maxval << "\n";
  std::vector<unsigned char> raw;
  raw.reserve(image.size() * (bit_depth / 8));
  for (float v : image.values()) {
    const int q = static_cast<int>(std::clamp(std::nearbyint(v), 0.0f, static_cast<float>(maxval)));
    if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

LoadedImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageIoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + ": PNG decode error");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + ": only grayscale PNG is supported");
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<float> values(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const unsigned char* p = rows[y];
      values[static_cast<std::size_t>(y) * w + x] =
          depth == 16 ? static_cast<float>((p[2 * x] << 8) | p[2 * x + 1]) : p[x];
    }
  return {Image(w, h, std::move(values)), depth};
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageIoError("PNG bit depth must be 8 or 16");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageIoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng init failed");
  }
  const int w = image.width(), h = image.height();
  const int bytes = bit_depth / 8;
  const float maxval = bit_depth == 8 ? 255.0f : 65535.0f;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const int q = static_cast<int>(std::clamp(std::nearbyint(image.values()[i]), 0.0f, maxval));
    if (bytes == 2) {
      buf[2 * i] = static_cast<unsigned char>(q >> 8);
      buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    } else {
      buf[i] = static_cast<unsigned char>(q);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError(path.string() + ": PNG encode error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

LoadedImage read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw ImageIoError(path.string() + ": unsupported image format (use .pgm or .png)");
}

}  // namespace camnoise
