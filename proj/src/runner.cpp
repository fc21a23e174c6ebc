#include "pad/runner.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "pad/backend.hpp"
#include "pad/checkpoint.hpp"
#include "pad/error.hpp"
#include "pad/metrics.hpp"

namespace pad {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kToolVersion = "pad 0.1.0";

struct Cell {
  std::size_t tmpl = 0;
  Style style = Style::MC;
  std::size_t example = 0;
};

struct CellResult {
  int base = -1, length = -1, prior = -1;  // MC predictions per normalization
  int pred = -1;                           // FMC prediction
  std::string text;                        // G parsed answer
  bool ok = false;
  std::string error_kind;  // "backend" | "validation" | "other"
  std::string error_code;
  std::string error_msg;
};

std::string cell_key(const std::string& example, const std::string& tmpl, Style style) {
  return example + '\x1f' + tmpl + '\x1f' + style_name(style);
}

std::string slurp_if_exists(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json load_manifest(const std::string& path) {
  const std::string text = slurp_if_exists(path);
  if (text.empty()) return ordered_json::object();
  try {
    return ordered_json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
}

void save_manifest(const std::string& path, const ordered_json& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out.good()) throw IoError("failed writing manifest '" + path + "'");
}

std::vector<std::string> split_entities(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto push = [&] {
    std::size_t b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      std::size_t e = cur.find_last_not_of(" \t\r\n");
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (char c : text) {
    if (c == ',')
      push();
    else
      cur += c;
  }
  push();
  return out;
}

std::string jsonl_line(const DatasetSpec& spec, const Cell& cell, const CellResult& r) {
  ordered_json j;
  j["example"] = spec.examples[cell.example].id;
  j["template"] = spec.templates[cell.tmpl].name;
  j["style"] = style_name(cell.style);
  switch (cell.style) {
    case Style::MC:
      j["base"] = r.base;
      j["length"] = r.length;
      j["prior"] = r.prior;
      break;
    case Style::FMC:
      j["pred"] = r.pred;
      break;
    case Style::G:
      j["text"] = r.text;
      break;
  }
  return j.dump();
}

std::map<std::string, CellResult> read_log(const std::string& path) {
  std::map<std::string, CellResult> done;
  const std::string text = slurp_if_exists(path);
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": corrupt result line: " + e.what());
    }
    try {
      CellResult r;
      r.ok = true;
      const Style style = style_from_name(j.at("style").get<std::string>());
      switch (style) {
        case Style::MC:
          r.base = j.at("base").get<int>();
          r.length = j.at("length").get<int>();
          r.prior = j.at("prior").get<int>();
          break;
        case Style::FMC:
          r.pred = j.at("pred").get<int>();
          break;
        case Style::G:
          r.text = j.at("text").get<std::string>();
          break;
      }
      done[cell_key(j.at("example").get<std::string>(), j.at("template").get<std::string>(),
                    style)] = r;
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": result line is missing fields: " + e.what());
    }
  }
  return done;
}

CellResult evaluate_cell(const DatasetSpec& spec, const Cell& cell, Backend& backend,
                         std::uint64_t seed, LengthNorm norm, const std::string& profile,
                         int max_tokens) {
  CellResult r;
  const TemplateSpec& tmpl = spec.templates[cell.tmpl];
  const TaskInstance& target = spec.examples[cell.example];
  auto shots = sample_shots(spec, target, shot_seed(seed, spec.name, target.id));
  RenderedPrompt rendered = render(tmpl, shots, target);
  switch (cell.style) {
    case Style::MC: {
      McResult mc = eval_mc(rendered, backend, norm);
      r.base = mc.pred.base;
      r.length = mc.pred.length;
      r.prior = mc.pred.prior;
      break;
    }
    case Style::FMC:
      r.pred = eval_fmc(rendered, backend);
      break;
    case Style::G:
      r.text = eval_g(rendered, backend, profile, max_tokens);
      break;
  }
  r.ok = true;
  return r;
}

// records for one (template, style, normalization) column, in example order
std::vector<ScoredRecord> build_records(const DatasetSpec& spec,
                                        const std::vector<const TaskInstance*>& examples,
                                        const std::vector<const CellResult*>& cells, Style style,
                                        const std::string& norm) {
  std::vector<ScoredRecord> records;
  records.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TaskInstance& ex = *examples[i];
    const CellResult& r = *cells[i];
    ScoredRecord rec;
    rec.group = ex.group;
    auto et = ex.fields.find("entity_type");
    if (et != ex.fields.end()) rec.entity_type = et->second;
    if (style == Style::G) {
      rec.prediction = r.text;
      rec.golds = ex.gold_texts.empty()
                      ? std::vector<std::string>{ex.choices.at(ex.gold_index)}
                      : ex.gold_texts;
      if (spec.metric == "f1") rec.predicted_list = split_entities(r.text);
    } else {
      const int pred = style == Style::FMC ? r.pred
                       : norm == "base"    ? r.base
                       : norm == "length"  ? r.length
                                           : r.prior;
      if (pred < 0 || pred >= static_cast<int>(ex.choices.size()))
        throw ValidationError("dataset '" + spec.name + "' example '" + ex.id +
                              "': logged prediction " + std::to_string(pred) +
                              " does not index the choices");
      rec.prediction = ex.choices[pred];
      rec.golds = {ex.choices.at(ex.gold_index)};
    }
    records.push_back(std::move(rec));
  }
  return records;
}

struct DatasetRun {
  std::string compacted_path;
  bool evaluated = false;  // false = skipped, everything was already there
};

DatasetRun run_dataset(const EvalOptions& o, const LoadedDataset& ds,
                       const std::vector<std::unique_ptr<Backend>>& backends,
                       const std::string& results_dir) {
  const DatasetSpec& spec = ds.spec;
  const std::string log_path = results_dir + "/" + spec.name + ".jsonl";
  const std::string compacted_path = results_dir + "/" + spec.name + ".json";

  // effective styles: declared ∩ requested, in declaration order
  std::vector<Style> styles;
  for (Style s : spec.styles) {
    if (!o.styles.empty() && std::find(o.styles.begin(), o.styles.end(), s) == o.styles.end())
      continue;
    styles.push_back(s);
  }
  if (styles.empty())
    throw ValidationError("the style filter leaves dataset '" + spec.name +
                          "' with no evaluations");

  std::vector<Cell> cells;
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    if (std::find(styles.begin(), styles.end(), spec.templates[t].style) == styles.end())
      continue;
    for (std::size_t e = 0; e < spec.examples.size(); ++e) cells.push_back({t, spec.templates[t].style, e});
  }

  std::map<std::string, CellResult> done = read_log(log_path);
  std::vector<std::size_t> pending;  // indices into cells
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    if (!done.count(
            cell_key(spec.examples[c.example].id, spec.templates[c.tmpl].name, c.style)))
      pending.push_back(i);
  }

  if (pending.empty() && fs::exists(compacted_path)) return {compacted_path, false};

  if (!pending.empty()) {
    std::vector<CellResult> slots(pending.size());
    const int workers = std::max(1, o.workers);
#pragma omp parallel num_threads(workers)
    {
      const std::size_t who = static_cast<std::size_t>(omp_get_thread_num());
      Backend& backend = *backends[who % backends.size()];
#pragma omp for schedule(dynamic)
      for (long i = 0; i < static_cast<long>(pending.size()); ++i) {
        const Cell& cell = cells[pending[static_cast<std::size_t>(i)]];
        CellResult& slot = slots[static_cast<std::size_t>(i)];
        try {
          slot = evaluate_cell(spec, cell, backend, o.seed, o.length_norm, ds.parser_profile,
                               ds.max_tokens);
        } catch (const BackendError& e) {
          slot.error_kind = "backend";
          slot.error_code = e.code();
          slot.error_msg = e.what();
        } catch (const ValidationError& e) {
          slot.error_kind = "validation";
          slot.error_msg = e.what();
        } catch (const std::exception& e) {
          slot.error_kind = "other";
          slot.error_msg = e.what();
        }
      }
    }

    // persist completed work in slot order, then surface the first failure
    {
      std::ofstream log(log_path, std::ios::binary | std::ios::app);
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (!slots[i].ok) continue;
        log << jsonl_line(spec, cells[pending[i]], slots[i]) << '\n';
        done[cell_key(spec.examples[cells[pending[i]].example].id,
                      spec.templates[cells[pending[i]].tmpl].name, cells[pending[i]].style)] =
            slots[i];
      }
      if (!log.good()) throw IoError("failed writing " + log_path);
    }
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (slots[i].ok) continue;
      const Cell& cell = cells[pending[i]];
      const std::string where = spec.name + "/" + spec.examples[cell.example].id + "/" +
                                spec.templates[cell.tmpl].name + "/" + style_name(cell.style);
      if (slots[i].error_kind == "backend")
        throw BackendError(slots[i].error_code, where + ": " + slots[i].error_msg);
      if (slots[i].error_kind == "validation")
        throw ValidationError(where + ": " + slots[i].error_msg);
      throw IoError(where + ": " + slots[i].error_msg);
    }
  }

  // compact: score every (template, style, normalization) column
  std::map<EvalKey, double> scores;
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    const TemplateSpec& tmpl = spec.templates[t];
    if (std::find(styles.begin(), styles.end(), tmpl.style) == styles.end()) continue;
    std::vector<const TaskInstance*> examples;
    std::vector<const CellResult*> results;
    for (std::size_t e = 0; e < spec.examples.size(); ++e) {
      const std::string key = cell_key(spec.examples[e].id, tmpl.name, tmpl.style);
      auto it = done.find(key);
      if (it == done.end())
        throw ValidationError("internal: cell '" + spec.examples[e].id + "/" + tmpl.name +
                              "' missing after evaluation");
      examples.push_back(&spec.examples[e]);
      results.push_back(&it->second);
    }
    std::vector<std::string> norms;
    if (tmpl.style == Style::MC) {
      norms = {"base", "length"};
      if (tmpl.has_calibration_marker()) norms.push_back("prior");
    } else {
      norms = {"-"};
    }
    for (const auto& norm : norms) {
      auto records = build_records(spec, examples, results, tmpl.style, norm);
      scores[{tmpl.name, tmpl.style, norm}] = evaluate_metric(spec.metric, records).value;
    }
  }
  DatasetScore aggregated = aggregate_dataset(spec.name, scores);

  ordered_json compacted;
  compacted["dataset"] = spec.name;
  compacted["lambda"] = o.lambda.to_string();
  compacted["metric"] = spec.metric;
  compacted["examples"] = spec.examples.size();
  compacted["scores"] = ordered_json::array();
  for (const auto& [key, value] : aggregated.per_evaluation) {
    ordered_json row;
    row["template"] = key.tmpl;
    row["style"] = style_name(key.style);
    row["normalization"] = key.normalization;
    row["value"] = value;
    compacted["scores"].push_back(row);
  }
  compacted["aggregate"] = aggregated.aggregate;
  std::ofstream out(compacted_path, std::ios::binary | std::ios::trunc);
  out << compacted.dump(2) << '\n';
  if (!out.good()) throw IoError("failed writing " + compacted_path);
  return {compacted_path, true};
}

}  // namespace

std::vector<std::string> run_eval(const EvalOptions& o) {
  if (o.datasets.empty()) throw ValidationError("no datasets to evaluate");
  if (o.out_dir.empty()) throw ValidationError("no output directory");
  if (o.lambda < Rational(0) || Rational(1) < o.lambda)
    throw ValidationError("strength λ=" + o.lambda.to_string() + " is outside [0, 1]");

  const std::string tag = o.lambda.file_tag();
  const std::string results_dir = o.out_dir + "/results/" + tag;
  std::error_code ec;
  fs::create_directories(results_dir, ec);
  if (ec) throw IoError("cannot create '" + results_dir + "': " + ec.message());

  const std::string manifest_path = o.out_dir + "/manifest.json";
  ordered_json manifest = load_manifest(manifest_path);
  if (manifest.contains("seed") && manifest["seed"].get<std::uint64_t>() != o.seed)
    throw ValidationError("output directory was produced with seed " +
                          manifest["seed"].dump() + ", not " + std::to_string(o.seed) +
                          "; use one seed per output directory");
  for (const auto& ds : o.datasets) {
    if (manifest.contains("datasets") && manifest["datasets"].contains(ds.spec.name) &&
        manifest["datasets"][ds.spec.name].get<std::string>() != ds.digest)
      throw ValidationError("dataset '" + ds.spec.name +
                            "' changed since results were written; remove " + o.out_dir +
                            "/results to re-evaluate");
  }
  if (!o.backend_digest.empty() && manifest.contains("backends") &&
      manifest["backends"].contains(tag) &&
      manifest["backends"][tag]["digest"].get<std::string>() != o.backend_digest)
    throw ValidationError("backend for λ=" + o.lambda.to_string() +
                          " changed since results were written; remove " + o.out_dir +
                          "/results/" + tag + " to re-evaluate");

  const int workers = std::max(1, o.workers);
  std::vector<std::unique_ptr<Backend>> backends;
  for (int i = 0; i < workers; ++i) backends.push_back(make_backend(o.backend_spec));

  manifest["tool"] = kToolVersion;
  manifest["seed"] = o.seed;
  if (!manifest.contains("backends")) manifest["backends"] = ordered_json::object();
  manifest["backends"][tag] = {{"spec", o.backend_spec}, {"digest", o.backend_digest}};
  if (!manifest.contains("datasets")) manifest["datasets"] = ordered_json::object();
  if (!manifest.contains("cells")) manifest["cells"] = ordered_json::object();

  std::vector<std::string> compacted;
  for (const auto& ds : o.datasets) {
    const std::string cell_name = tag + "/" + ds.spec.name;
    manifest["datasets"][ds.spec.name] = ds.digest;
    const auto started = std::chrono::steady_clock::now();
    try {
      DatasetRun run = run_dataset(o, ds, backends, results_dir);
      compacted.push_back(run.compacted_path);
    } catch (...) {
      manifest["cells"][cell_name] = "partial";
      save_manifest(manifest_path, manifest);
      throw;
    }
    manifest["cells"][cell_name] = "done";
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    if (!manifest.contains("elapsed_seconds")) manifest["elapsed_seconds"] = ordered_json::object();
    manifest["elapsed_seconds"][cell_name] = elapsed.count();
    save_manifest(manifest_path, manifest);
  }
  return compacted;
}

std::vector<ModelScore> collect_results(const std::string& out_dir) {
  const std::string results_dir = out_dir + "/results";
  if (!fs::is_directory(results_dir))
    throw ValidationError("no results under '" + out_dir + "' (expected " + results_dir + ")");

  std::vector<std::string> files;
  for (const auto& sub : fs::directory_iterator(results_dir)) {
    if (!sub.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(sub.path()))
      if (entry.path().extension() == ".json") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ValidationError("no compacted results under '" + results_dir +
                          "' (run an evaluation first)");

  std::map<Rational, std::vector<DatasetScore>> by_lambda;
  for (const auto& path : files) {
    json j;
    try {
      j = json::parse(slurp_if_exists(path));
    } catch (const json::exception& e) {
      throw ValidationError(path + ": corrupt result file: " + e.what());
    }
    try {
      const Rational lambda = Rational::parse(j.at("lambda").get<std::string>());
      std::map<EvalKey, double> scores;
      for (const auto& row : j.at("scores")) {
        EvalKey key{row.at("template").get<std::string>(),
                    style_from_name(row.at("style").get<std::string>()),
                    row.at("normalization").get<std::string>()};
        scores[key] = row.at("value").get<double>();
      }
      DatasetScore ds = aggregate_dataset(j.at("dataset").get<std::string>(), scores);
      const double recorded = j.at("aggregate").get<double>();
      if (std::abs(recorded - ds.aggregate) > 1e-9)
        throw ValidationError(path + ": recorded aggregate " + std::to_string(recorded) +
                              " does not match its own scores (" +
                              std::to_string(ds.aggregate) + ")");
      by_lambda[lambda].push_back(std::move(ds));
    } catch (const json::exception& e) {
      throw ValidationError(path + ": result file is missing fields: " + e.what());
    }
  }

  std::vector<ModelScore> sweep;
  for (auto& [lambda, datasets] : by_lambda)
    sweep.push_back(aggregate_model(lambda, std::move(datasets)));
  return sweep;
}

}  // namespace pad
