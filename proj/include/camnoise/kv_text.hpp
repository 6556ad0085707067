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

// Line-oriented "key = value" text used by manifests, sidecars and metadata
// files. '#' starts a comment line. Keys keep insertion order on write.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace camnoise {

class KvParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KvText {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static KvText parse(const std::string& text);

  void write(const std::filesystem::path& path) const;
  static KvText read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Shortest decimal text that round-trips the double exactly.
std::string format_exact(double value);

}  // namespace camnoise
