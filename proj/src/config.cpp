#include "hdpca/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hdpca/errors.hpp"

namespace hdpca {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

namespace {

std::string unquote(const std::string& value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') return value.substr(1, value.size() - 2);
  return value;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig config;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (config.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    config.entries_[key] = unquote(trim(std::string_view(line).substr(eq + 1)));
  }
  return config;
}

KeyValueConfig KeyValueConfig::parse_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse(in, path.string());
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  const auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> split_list(std::string_view text, char separator) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t pos = text.find(separator, start);
    const std::string item = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) items.push_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return items;
}

double parse_double(std::string_view text, std::string_view key) {
  const std::string buf = trim(text);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(value)) {
    throw ConfigError("'" + std::string(key) + "': expected a number, got '" + buf + "'");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view text, std::string_view key) {
  const std::string buf = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), value);
  if (buf.empty() || ec != std::errc() || ptr != buf.data() + buf.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a non-negative integer, got '" + buf + "'");
  }
  return value;
}

std::size_t parse_size(std::string_view text, std::string_view key) {
  return static_cast<std::size_t>(parse_u64(text, key));
}

bool parse_bool(std::string_view text, std::string_view key) {
  const std::string buf = trim(text);
  if (buf == "true" || buf == "1" || buf == "yes") return true;
  if (buf == "false" || buf == "0" || buf == "no") return false;
  throw ConfigError("'" + std::string(key) + "': expected true/false, got '" + buf + "'");
}

}  // namespace hdpca
