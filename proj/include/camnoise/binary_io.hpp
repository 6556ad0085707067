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

// Little-endian primitives for the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace camnoise::binio {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
    return out;
  } else {
    return v;
  }
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline void put_f32(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
}

/// Each getter returns false on short read.
inline bool get_u32(std::istream& in, std::uint32_t& v) {
  if (!in.read(reinterpret_cast<char*>(&v), 4)) return false;
  v = to_little(v);
  return true;
}

inline bool get_u64(std::istream& in, std::uint64_t& v) {
  if (!in.read(reinterpret_cast<char*>(&v), 8)) return false;
  v = to_little(v);
  return true;
}

inline bool get_f32(std::istream& in, std::span<float> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * 4)))
    return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : values) f = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(f)));
  }
  return true;
}

}  // namespace camnoise::binio
