#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace grelu {

// Flat text config: one `section.key = value` per line, '#' starts a comment,
// blank lines ignored. Keys must contain a dot; duplicates are an error.
class FlatConfig {
 public:
  static FlatConfig parse(std::istream& in);
  static FlatConfig parse_string(const std::string& text);
  static FlatConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;
  void set(const std::string& key, std::string value);

  // Typed lookups throw FormatError on unparsable values.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  // Comma or whitespace separated tokens; missing key gives an empty list.
  std::vector<std::string> get_list(const std::string& key) const;

  // Keys not in `known`, in sorted order.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  // Sorted by key, one `key = value` per line.
  void write(std::ostream& out) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  bool operator==(const FlatConfig& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::uint64_t> offsets_;
};

}  // namespace grelu
