#pragma once

// Flat key-value configuration text:
//
//   # comment
//   mode = hdlss
//   template.spikes = "power:1:1.6"
//   [grid]
//   d = 500,5000,50000
//
// A "[section]" header prefixes following keys with "section.". Values may be
// double-quoted. Duplicate keys are an error.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hdpca {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig parse_string(std::string_view text);
  /// Throws ConfigError when the file cannot be opened.
  static KeyValueConfig load(const std::filesystem::path& path);

  std::optional<std::string> get(std::string_view key) const;
  bool contains(std::string_view key) const { return entries_.count(std::string(key)) != 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::vector<std::string> split_list(std::string_view text, char separator = ',');
std::string trim(std::string_view text);

double parse_double(std::string_view text, std::string_view key);
std::uint64_t parse_u64(std::string_view text, std::string_view key);
std::size_t parse_size(std::string_view text, std::string_view key);
bool parse_bool(std::string_view text, std::string_view key);

}  // namespace hdpca
