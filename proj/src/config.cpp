#include "grelu/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "grelu/error.hpp"

namespace grelu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

FlatConfig FlatConfig::parse(std::istream& in) {
  FlatConfig cfg;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t start = offset;
    offset += line.size() + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected `key = value`", start);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (key.empty() || dot == 0 || dot == std::string::npos || dot + 1 == key.size()) {
      throw FormatError("key must look like section.key: '" + key + "'", start);
    }
    if (key.find_first_of(" \t") != std::string::npos) {
      throw FormatError("whitespace in key '" + key + "'", start);
    }
    if (cfg.values_.count(key)) throw FormatError("duplicate key '" + key + "'", start);
    cfg.values_[key] = value;
    cfg.offsets_[key] = start;
  }
  return cfg;
}

FlatConfig FlatConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

FlatConfig FlatConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return parse(f);
}

std::optional<std::string> FlatConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void FlatConfig::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
  offsets_.erase(key);
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    const auto it = offsets_.find(key);
    throw FormatError(key + ": not a number '" + *v + "'",
                      it == offsets_.end() ? 0 : it->second);
  }
  return out;
}

std::uint64_t FlatConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    const auto it = offsets_.find(key);
    throw FormatError(key + ": not a non-negative integer '" + *v + "'",
                      it == offsets_.end() ? 0 : it->second);
  }
  return out;
}

std::vector<std::string> FlatConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto v = raw(key);
  if (!v) return out;
  std::string tok;
  for (char c : *v + ",") {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!tok.empty()) out.push_back(tok);
      tok.clear();
    } else {
      tok += c;
    }
  }
  return out;
}

std::vector<std::string> FlatConfig::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  }
  return out;
}

void FlatConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
}

}  // namespace grelu
