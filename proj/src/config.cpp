#include "pad/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pad/error.hpp"

namespace pad {

namespace {

struct Parser {
  const std::string& source;
  std::vector<std::string> lines;
  std::size_t index = 0;  // next line to consume

  explicit Parser(const std::string& text, const std::string& source_name) : source(source_name) {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }

  [[noreturn]] void fail(std::size_t line_no, const std::string& msg) const {
    throw ValidationError(source + ":" + std::to_string(line_no) + ": " + msg);
  }

  static std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
  }

  // Parse one basic "..." string starting at text[pos] == '"'. Returns the
  // decoded value and leaves pos one past the closing quote.
  std::string basic_string(const std::string& text, std::size_t& pos, std::size_t line_no) {
    std::string out;
    ++pos;  // opening quote
    while (pos < text.size()) {
      char c = text[pos];
      if (c == '"') {
        ++pos;
        return out;
      }
      if (c == '\\') {
        if (pos + 1 >= text.size()) fail(line_no, "dangling escape in string");
        char e = text[pos + 1];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: fail(line_no, std::string("unsupported escape '\\") + e + "' in string");
        }
        pos += 2;
      } else {
        out += c;
        ++pos;
      }
    }
    fail(line_no, "unterminated string");
  }

  // The remainder of a line after a value: whitespace or a comment only.
  void expect_rest_empty(const std::string& text, std::size_t pos, std::size_t line_no) {
    std::string rest = strip(text.substr(pos));
    if (!rest.empty() && rest[0] != '#')
      fail(line_no, "unexpected text after value: '" + rest + "'");
  }

  // Literal multi-line string. `after` is the text following the opening
  // ''' on the key's line; may consume following lines.
  std::string literal_string(std::string after, std::size_t line_no) {
    std::size_t close = after.find("'''");
    if (close != std::string::npos) {
      expect_rest_empty(after, close + 3, line_no);
      return after.substr(0, close);
    }
    // TOML drops a newline that immediately follows the opening quotes
    std::string out = after.empty() ? "" : after + "\n";
    while (index < lines.size()) {
      const std::string& line = lines[index];
      std::size_t line_number = index + 1;
      ++index;
      close = line.find("'''");
      if (close != std::string::npos) {
        expect_rest_empty(line, close + 3, line_number);
        out += line.substr(0, close);
        return out;
      }
      out += line;
      out += '\n';
    }
    fail(line_no, "unterminated ''' string");
  }

  ConfigValue parse_value(const std::string& text, std::size_t line_no) {
    ConfigValue v;
    v.line = static_cast<int>(line_no);
    std::string t = strip(text);
    if (t.empty()) fail(line_no, "missing value");
    if (t.rfind("'''", 0) == 0) {
      v.kind = ConfigValue::Kind::String;
      v.str = literal_string(text.substr(text.find("'''") + 3), line_no);
      return v;
    }
    if (t[0] == '"') {
      std::size_t pos = text.find('"');
      v.kind = ConfigValue::Kind::String;
      v.str = basic_string(text, pos, line_no);
      expect_rest_empty(text, pos, line_no);
      return v;
    }
    if (t[0] == '[') {
      v.kind = ConfigValue::Kind::StringArray;
      std::size_t pos = text.find('[') + 1;
      bool expecting_element = true, done = false;
      while (pos < text.size() && !done) {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
        if (pos >= text.size()) break;
        char c = text[pos];
        if (c == ']') {
          if (expecting_element && !v.array.empty())
            fail(line_no, "trailing comma in array");
          ++pos;
          done = true;
        } else if (c == ',') {
          if (expecting_element) fail(line_no, "unexpected ',' in array");
          expecting_element = true;
          ++pos;
        } else if (c == '"') {
          if (!expecting_element) fail(line_no, "missing ',' between array elements");
          v.array.push_back(basic_string(text, pos, line_no));
          expecting_element = false;
        } else {
          fail(line_no, "arrays may contain only \"...\" strings");
        }
      }
      if (!done) fail(line_no, "unterminated array");
      expect_rest_empty(text, pos, line_no);
      return v;
    }
    // strip an inline comment from a scalar
    std::size_t hash = t.find('#');
    if (hash != std::string::npos) t = strip(t.substr(0, hash));
    if (t == "true" || t == "false") {
      v.kind = ConfigValue::Kind::Boolean;
      v.boolean = t == "true";
      return v;
    }
    char* end = nullptr;
    const long long n = std::strtoll(t.c_str(), &end, 10);
    if (end == t.c_str() + t.size() && !t.empty()) {
      v.kind = ConfigValue::Kind::Integer;
      v.integer = n;
      return v;
    }
    fail(line_no, "cannot parse value '" + t + "' (expected a string, integer, boolean, or array)");
  }

  ConfigDoc parse() {
    ConfigDoc doc;
    doc.source = source;
    ConfigTable* current = &doc.root;
    while (index < lines.size()) {
      const std::string raw = lines[index];
      const std::size_t line_no = index + 1;
      ++index;
      const std::string line = strip(raw);
      if (line.empty() || line[0] == '#') continue;
      if (line[0] == '[') {
        const bool is_array = line.rfind("[[", 0) == 0;
        const std::string closer = is_array ? "]]" : "]";
        const std::size_t close = line.find(closer);
        if (close == std::string::npos) fail(line_no, "unterminated table header");
        const std::string name = strip(line.substr(is_array ? 2 : 1, close - (is_array ? 2 : 1)));
        if (!valid_key(name)) fail(line_no, "invalid table name '" + name + "'");
        expect_rest_empty(line, close + closer.size(), line_no);
        if (is_array) {
          doc.table_arrays[name].push_back(ConfigTable{{}, static_cast<int>(line_no)});
          current = &doc.table_arrays[name].back();
        } else {
          if (doc.tables.count(name))
            fail(line_no, "table [" + name + "] was already opened on line " +
                              std::to_string(doc.tables[name].line));
          doc.tables[name] = ConfigTable{{}, static_cast<int>(line_no)};
          current = &doc.tables[name];
        }
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
      const std::string key = strip(line.substr(0, eq));
      if (!valid_key(key)) fail(line_no, "invalid key '" + key + "'");
      if (current->values.count(key))
        fail(line_no, "duplicate key '" + key + "' (first set on line " +
                          std::to_string(current->values[key].line) + ")");
      // pass the untrimmed remainder so multi-line strings keep their bytes
      const std::size_t raw_eq = raw.find('=');
      current->values[key] = parse_value(raw.substr(raw_eq + 1), line_no);
    }
    return doc;
  }
};

[[noreturn]] void missing(const ConfigDoc& doc, const std::string& key, const char* what) {
  throw ValidationError(doc.source + ": missing or mistyped key '" + key + "' (need " + what +
                        ")");
}

}  // namespace

ConfigDoc parse_config(const std::string& text, const std::string& source_name) {
  return Parser(text, source_name).parse();
}

ConfigDoc load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

const ConfigValue* config_find(const ConfigTable& table, const std::string& key) {
  auto it = table.values.find(key);
  return it == table.values.end() ? nullptr : &it->second;
}

std::string config_string(const ConfigDoc& doc, const ConfigTable& table, const std::string& key) {
  const ConfigValue* v = config_find(table, key);
  if (!v || v->kind != ConfigValue::Kind::String) missing(doc, key, "a string");
  return v->str;
}

std::string config_string_or(const ConfigTable& table, const std::string& key,
                             const std::string& fallback) {
  const ConfigValue* v = config_find(table, key);
  return v && v->kind == ConfigValue::Kind::String ? v->str : fallback;
}

std::int64_t config_int(const ConfigDoc& doc, const ConfigTable& table, const std::string& key) {
  const ConfigValue* v = config_find(table, key);
  if (!v || v->kind != ConfigValue::Kind::Integer) missing(doc, key, "an integer");
  return v->integer;
}

std::int64_t config_int_or(const ConfigTable& table, const std::string& key,
                           std::int64_t fallback) {
  const ConfigValue* v = config_find(table, key);
  return v && v->kind == ConfigValue::Kind::Integer ? v->integer : fallback;
}

std::vector<std::string> config_array(const ConfigDoc& doc, const ConfigTable& table,
                                      const std::string& key) {
  const ConfigValue* v = config_find(table, key);
  if (!v || v->kind != ConfigValue::Kind::StringArray) missing(doc, key, "an array of strings");
  return v->array;
}

}  // namespace pad
