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

#include "camnoise/kv_text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace camnoise {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_exact: conversion failed");
  return std::string(buf, ptr);
}

void KvText::set(const std::string& key, std::string value) {
  if (auto it = index_.find(key); it != index_.end()) {
    entries_[it->second].second = std::move(value);
    return;
  }
  index_.emplace(key, entries_.size());
  entries_.emplace_back(key, std::move(value));
}

void KvText::set(const std::string& key, double value) { set(key, format_exact(value)); }

void KvText::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

bool KvText::contains(const std::string& key) const { return index_.count(key) != 0; }

const std::string& KvText::get(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw KvParseError("missing key '" + key + "'");
  return entries_[it->second].second;
}

double KvText::get_double(const std::string& key) const {
  const std::string& text = get(key);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw KvParseError("key '" + key + "': not a number: '" + text + "'");
  return value;
}

long long KvText::get_int(const std::string& key) const {
  const std::string& text = get(key);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw KvParseError("key '" + key + "': not an integer: '" + text + "'");
  return value;
}

std::string KvText::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

KvText KvText::parse(const std::string& text) {
  KvText kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw KvParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw KvParseError("line " + std::to_string(lineno) + ": empty key");
    kv.set(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

void KvText::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_string();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

KvText KvText::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace camnoise
