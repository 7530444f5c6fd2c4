#pragma once

// Plain-text key=value configuration. Blank lines and lines starting with '#'
// are ignored; whitespace around keys and values is trimmed. Later keys win.

#include <filesystem>
#include <map>
#include <string>

namespace misc {

using KeyValues = std::map<std::string, std::string>;

// Throws ConfigError naming `source` and the line on malformed input.
KeyValues parse_key_values(const std::string& text, const std::string& source = "<string>");
KeyValues read_key_value_file(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

int parse_int(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace misc
