// SPDX-License-Identifier: Apache-2.0
#include "hsnet/config.hpp"

#include <charconv>
#include <fstream>

namespace hsnet {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::istream& in, std::string_view source) {
  std::vector<KeyValue> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidSpec, std::string(source) + ":" + std::to_string(n) + ": expected key=value");
    }
    out.push_back({std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))), n});
  }
  return out;
}

Config Config::parse(std::istream& in, std::string_view source) {
  Config c;
  for (auto& kv : parse_key_values(in, source)) {
    if (c.values_.count(kv.key) != 0) {
      throw Error(ErrorCode::kInvalidSpec,
                  std::string(source) + ":" + std::to_string(kv.line) + ": duplicate key '" + kv.key + "'");
    }
    c.values_.emplace(std::move(kv.key), std::move(kv.value));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse(in, path.string());
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& Config::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::kInvalidSpec, "missing key '" + std::string(key) + "'");
  return it->second;
}

std::string Config::get_or(std::string_view key, std::string fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw Error(ErrorCode::kInvalidSpec, "key '" + std::string(key) + "' is not a non-negative integer: " + v);
  }
  return out;
}

double Config::get_double(std::string_view key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidSpec, "key '" + std::string(key) + "' is not a number: " + v);
}

Architecture architecture_from_config(const Config& cfg) {
  return make_architecture(parse_backbone(cfg.get_or("backbone", "resnet101")),
                           parse_variant(cfg.get_or("kernel", "center-pivot")), cfg.get_size("groups", 4));
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace hsnet
