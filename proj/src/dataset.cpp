#include "pad/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pad/checkpoint.hpp"
#include "pad/config.hpp"
#include "pad/error.hpp"
#include "pad/metrics.hpp"

namespace pad {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void fail_line(const std::string& path, std::size_t line_no, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(line_no) + ": " + msg);
}

TaskInstance parse_example(const std::string& data_path, std::size_t line_no,
                           const std::string& line, const std::string& group_field) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::exception& e) {
    fail_line(data_path, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) fail_line(data_path, line_no, "expected a JSON object");

  TaskInstance inst;
  for (const auto& [key, value] : record.items()) {
    if (key == "id") {
      if (!value.is_string()) fail_line(data_path, line_no, "\"id\" must be a string");
      inst.id = value.get<std::string>();
    } else if (key == "choices") {
      if (!value.is_array()) fail_line(data_path, line_no, "\"choices\" must be an array");
      for (const auto& c : value) {
        if (!c.is_string())
          fail_line(data_path, line_no, "\"choices\" entries must be strings");
        inst.choices.push_back(c.get<std::string>());
      }
    } else if (key == "gold") {
      if (!value.is_number_integer())
        fail_line(data_path, line_no, "\"gold\" must be an integer choice index");
      inst.gold_index = value.get<int>();
    } else if (key == "gold_texts") {
      if (!value.is_array()) fail_line(data_path, line_no, "\"gold_texts\" must be an array");
      for (const auto& g : value) {
        if (!g.is_string())
          fail_line(data_path, line_no, "\"gold_texts\" entries must be strings");
        inst.gold_texts.push_back(g.get<std::string>());
      }
    } else if (value.is_string()) {
      inst.fields[key] = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      inst.fields[key] = value.dump();
    } else {
      fail_line(data_path, line_no,
                "field \"" + key + "\" must be a scalar (got " + std::string(value.type_name()) +
                    ")");
    }
  }
  if (inst.id.empty()) fail_line(data_path, line_no, "missing required \"id\"");
  if (inst.gold_index >= 0 && !inst.choices.empty() &&
      inst.gold_index >= static_cast<int>(inst.choices.size()))
    fail_line(data_path, line_no,
              "gold index " + std::to_string(inst.gold_index) + " out of range (" +
                  std::to_string(inst.choices.size()) + " choices)");
  auto gf = inst.fields.find(group_field);
  if (gf != inst.fields.end()) inst.group = gf->second;
  return inst;
}

}  // namespace

LoadedDataset load_dataset(const std::string& config_path) {
  const std::string config_text = slurp(config_path, "dataset config");
  ConfigDoc doc = parse_config(config_text, config_path);

  LoadedDataset out;
  out.config_path = config_path;
  out.spec.name = config_string(doc, doc.root, "name");
  out.spec.metric = config_string(doc, doc.root, "metric");
  if (!is_known_metric(out.spec.metric))
    throw ValidationError(config_path + ": unknown metric '" + out.spec.metric + "'");
  out.spec.shots = static_cast<int>(config_int(doc, doc.root, "shots"));
  for (const auto& s : config_array(doc, doc.root, "styles"))
    out.spec.styles.push_back(style_from_name(s));
  out.spec.group_field = config_string_or(doc.root, "group_field", "group");
  out.parser_profile = config_string_or(doc.root, "parser_profile", "default");
  out.max_tokens = static_cast<int>(config_int_or(doc.root, "max_tokens", 32));
  out.declared_size = config_int_or(doc.root, "declared_size", -1);

  auto templates = doc.table_arrays.find("template");
  if (templates == doc.table_arrays.end() || templates->second.empty())
    throw ValidationError(config_path + ": no [[template]] tables");
  for (const auto& table : templates->second) {
    TemplateSpec t;
    t.name = config_string(doc, table, "name");
    t.style = style_from_name(config_string(doc, table, "style"));
    t.body = config_string(doc, table, "body");
    out.spec.templates.push_back(std::move(t));
  }

  const std::string data_rel = config_string(doc, doc.root, "data");
  out.data_path =
      (std::filesystem::path(config_path).parent_path() / data_rel).lexically_normal().string();
  const std::string data_text = slurp(out.data_path, "dataset data file");

  std::istringstream lines(data_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;  // blank line
    out.spec.examples.push_back(parse_example(out.data_path, line_no, line, out.spec.group_field));
  }

  if (out.declared_size >= 0 &&
      out.declared_size != static_cast<std::int64_t>(out.spec.examples.size()))
    out.warnings.push_back(out.data_path + ": declared size " + std::to_string(out.declared_size) +
                           " but found " + std::to_string(out.spec.examples.size()) + " examples");

  out.spec.validate();

  std::uint64_t h = fnv1a64(config_text.data(), config_text.size());
  h = fnv1a64(data_text.data(), data_text.size(), h);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  out.digest = hex;
  return out;
}

}  // namespace pad
