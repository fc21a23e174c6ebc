// Minimal TOML-style config reader.
//
// Supported subset, chosen to keep dataset sidecar files readable:
//   - `key = value` pairs with bare keys [A-Za-z0-9_-]+
//   - values: basic strings "..." (escapes \" \\ \n \t \r), literal
//     multi-line strings '''...''' (no escapes; a newline right after the
//     opening quotes is dropped, TOML-style), integers, true/false, and
//     single-line arrays of basic strings
//   - `[name]` named tables (each may be opened once)
//   - `[[name]]` array-of-tables entries
//   - `#` comments, full-line or after a value
// Anything else is rejected with a `source:line:` prefixed message.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pad {

struct ConfigValue {
  enum class Kind { String, Integer, Boolean, StringArray };
  Kind kind = Kind::String;
  std::string str;
  std::int64_t integer = 0;
  bool boolean = false;
  std::vector<std::string> array;
  int line = 0;
};

struct ConfigTable {
  std::map<std::string, ConfigValue> values;
  int line = 0;  // line the table header appeared on (0 for the root)
};

struct ConfigDoc {
  std::string source;  // file name used in error messages
  ConfigTable root;
  std::map<std::string, ConfigTable> tables;                   // [name]
  std::map<std::string, std::vector<ConfigTable>> table_arrays;  // [[name]]
};

ConfigDoc parse_config(const std::string& text, const std::string& source_name);
ConfigDoc load_config(const std::string& path);

// Typed accessors; "required" variants throw ValidationError naming the
// source file and key.
const ConfigValue* config_find(const ConfigTable& table, const std::string& key);
std::string config_string(const ConfigDoc& doc, const ConfigTable& table, const std::string& key);
std::string config_string_or(const ConfigTable& table, const std::string& key,
                             const std::string& fallback);
std::int64_t config_int(const ConfigDoc& doc, const ConfigTable& table, const std::string& key);
std::int64_t config_int_or(const ConfigTable& table, const std::string& key,
                           std::int64_t fallback);
std::vector<std::string> config_array(const ConfigDoc& doc, const ConfigTable& table,
                                      const std::string& key);

}  // namespace pad
