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

#include "camnoise/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "camnoise/binary_io.hpp"
#include "camnoise/hash.hpp"

namespace camnoise::nn {

namespace {

std::uint64_t hash_bytes(const std::string& bytes, std::size_t len) {
  return fnv1a64(std::string_view(bytes.data(), len));
}

}  // namespace

std::string encode_checkpoint(const ParameterSet<float>& params, const KvText& manifest) {
  std::ostringstream out(std::ios::binary);
  out.write("CNCK", 4);
  binio::put_u32(out, kCheckpointVersion);
  const std::string text = manifest.to_string();
  binio::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  binio::put_u32(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& e : params.entries()) {
    binio::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (int d : e.value.shape()) binio::put_u32(out, static_cast<std::uint32_t>(d));
    binio::put_f32(out, e.value.values());
  }
  std::string bytes = out.str();
  std::ostringstream tail(std::ios::binary);
  binio::put_u64(tail, hash_bytes(bytes, bytes.size()));
  return bytes + tail.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 + 4 + 8 + 4 + 8) throw CheckpointError("checkpoint truncated");
  if (bytes.compare(0, 4, "CNCK") != 0) throw CheckpointError("not a checkpoint (bad magic)");
  {
    std::istringstream tail(bytes.substr(bytes.size() - 8), std::ios::binary);
    std::uint64_t stored = 0;
    binio::get_u64(tail, stored);
    if (stored != hash_bytes(bytes, bytes.size() - 8)) throw CheckpointError("checkpoint hash mismatch");
  }
  std::istringstream in(bytes.substr(4, bytes.size() - 12), std::ios::binary);
  std::uint32_t version = 0;
  std::uint64_t text_len = 0;
  if (!binio::get_u32(in, version)) throw CheckpointError("checkpoint truncated");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  if (!binio::get_u64(in, text_len) || text_len > bytes.size()) throw CheckpointError("checkpoint truncated");
  std::string text(text_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_len))) throw CheckpointError("checkpoint truncated");

  Checkpoint ck;
  ck.manifest = KvText::parse(text);
  std::uint32_t count = 0;
  if (!binio::get_u32(in, count)) throw CheckpointError("checkpoint truncated");
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t name_len = 0, rank = 0;
    if (!binio::get_u32(in, name_len) || name_len > bytes.size()) throw CheckpointError("checkpoint truncated");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len) || !binio::get_u32(in, rank)) throw CheckpointError("checkpoint truncated");
    if (rank < 1 || rank > 4) throw CheckpointError("tensor " + name + " has invalid rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!binio::get_u32(in, v)) throw CheckpointError("checkpoint truncated");
      d = static_cast<int>(v);
    }
    if (shape_numel(shape) * 4 > bytes.size()) throw CheckpointError("tensor " + name + " larger than file");
    Tensor<float> value(shape);
    if (!binio::get_f32(in, value.values())) throw CheckpointError("checkpoint truncated");
    ck.params.add(name, std::move(value));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet<float>& params, const KvText& manifest) {
  const std::string bytes = encode_checkpoint(params, manifest);
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace camnoise::nn
