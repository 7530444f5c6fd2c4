#include "misc/config.hpp"

#include <charconv>
#include <sstream>

#include "misc/errors.hpp"
#include "misc/mten.hpp"

namespace misc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_value_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_key_values(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto* end = value.data() + value.size();
  const auto r = std::from_chars(value.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": expected an integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0;
  const auto* end = value.data() + value.size();
  const auto r = std::from_chars(value.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace misc
