// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hsnet/architecture.hpp"

namespace hsnet {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// "key=value" per line; '#' starts a comment line; blank lines skipped;
// whitespace around key and value trimmed. Order and repeats preserved.
std::vector<KeyValue> parse_key_values(std::istream& in, std::string_view source);

// Unique-key view used for configuration files.
class Config {
 public:
  Config() = default;
  static Config parse(std::istream& in, std::string_view source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::vector<std::string> keys() const;
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Keys: backbone (default resnet101), kernel (default center-pivot), groups (default 4).
Architecture architecture_from_config(const Config& cfg);

}  // namespace hsnet
