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

// Checkpoint byte layout (all integers little-endian):
//   "CNCK"                    4-byte magic
//   u32 version               currently 1
//   u64 manifest_len, bytes   key = value text
//   u32 tensor_count
//   per tensor: u32 name_len, name bytes, u32 rank, u32 dims[rank],
//               float32 values[prod(dims)]
//   u64 FNV-1a 64 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "camnoise/kv_text.hpp"
#include "camnoise/nn/tensor.hpp"

namespace camnoise::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  KvText manifest;
  ParameterSet<float> params;
};

std::string encode_checkpoint(const ParameterSet<float>& params, const KvText& manifest);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet<float>& params, const KvText& manifest);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace camnoise::nn
