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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace camnoise {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

/// 64-bit FNV-1a, chainable through `state`.
constexpr std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state = kFnvOffset) {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = kFnvOffset) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()),
                 state);
}

/// Hash of a file's bytes.
std::uint64_t hash_file(const std::filesystem::path& path, std::uint64_t state = kFnvOffset);

/// Hash over every regular file below `dir`, visited in sorted relative-path
/// order; the relative path is mixed in before each file's bytes.
std::uint64_t hash_directory(const std::filesystem::path& dir);

std::string hex64(std::uint64_t value);

}  // namespace camnoise
