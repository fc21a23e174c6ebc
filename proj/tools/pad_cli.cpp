// pad — merge strength-λ model interpolations, evaluate them on few-shot
// tasks, and report strength-selection summaries.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation failure,
// 3 backend failure (completed cells are persisted before exiting).
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pad/analysis.hpp"
#include "pad/checkpoint.hpp"
#include "pad/dataset.hpp"
#include "pad/error.hpp"
#include "pad/merge.hpp"
#include "pad/rational.hpp"
#include "pad/runner.hpp"
#include "pad/tiny_lm.hpp"
#include "pad/tiny_server.hpp"

namespace {

using namespace pad;

Rational parse_strength(const std::string& text) {
  Rational r = Rational::parse(text);
  if (r < Rational(0) || Rational(1) < r)
    throw ValidationError("strength λ=" + r.to_string() + " is outside [0, 1]");
  return r;
}

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// True when `out` already holds this exact merge (same λ, same input bytes).
bool merged_up_to_date(const std::string& out, const Rational& lambda, const std::string& base,
                       const std::string& instruct) {
  if (!std::filesystem::exists(out)) return false;
  try {
    const CheckpointManifest m = read_manifest(out);
    auto field = [&](const char* key) {
      auto it = m.metadata.find(key);
      return it == m.metadata.end() ? std::string() : it->second;
    };
    return field("pad_lambda") == lambda.to_string() &&
           field("pad_base_digest") == file_digest(base) &&
           field("pad_instruct_digest") == file_digest(instruct);
  } catch (...) {
    return false;  // unreadable or foreign file: fall through to a fresh merge
  }
}

BaseOnlyPolicy parse_policy(const std::string& name) {
  if (name == "error") return BaseOnlyPolicy::Error;
  if (name == "copy-base") return BaseOnlyPolicy::CopyBase;
  throw ValidationError("unknown --base-only-policy '" + name +
                        "' (expected 'error' or 'copy-base')");
}

int cmd_merge(const std::string& base, const std::string& instruct, const std::string& lambda_text,
              const std::string& out, const std::string& policy) {
  const Rational lambda = parse_strength(lambda_text);
  if (merged_up_to_date(out, lambda, base, instruct)) {
    std::cout << out << " is up to date (λ=" << lambda.to_string() << ")\n";
    return 0;
  }
  MergeSpec spec;
  spec.lambda = lambda;
  spec.base_path = base;
  spec.instruct_path = instruct;
  spec.output_path = out;
  spec.base_only_policy = parse_policy(policy);
  merge_checkpoints(spec);
  std::cout << "wrote " << out << " (λ=" << lambda.to_string() << ")\n";
  return 0;
}

int cmd_sweep_merge(const std::string& base, const std::string& instruct,
                    const std::string& out_dir, const std::vector<std::string>& grid_text,
                    const std::string& policy) {
  std::vector<Rational> grid;
  if (grid_text.empty()) {
    grid = lambda_grid();
  } else {
    for (const auto& g : grid_text) grid.push_back(parse_strength(trim(g)));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  int written = 0, skipped = 0;
  for (const Rational& lambda : grid) {
    const std::string out = out_dir + "/lambda_" + lambda.file_tag() + ".safetensors";
    if (merged_up_to_date(out, lambda, base, instruct)) {
      ++skipped;
      continue;
    }
    MergeSpec spec;
    spec.lambda = lambda;
    spec.base_path = base;
    spec.instruct_path = instruct;
    spec.output_path = out;
    spec.base_only_policy = parse_policy(policy);
    merge_checkpoints(spec);
    std::cout << "wrote " << out << " (λ=" << lambda.to_string() << ")\n";
    ++written;
  }
  std::cout << written << " merged, " << skipped << " up to date under " << out_dir << "\n";
  return 0;
}

struct EvalJob {
  std::string spec;    // backend descriptor
  std::string digest;  // checkpoint digest, "" for remote backends
  Rational lambda;
};

Rational checkpoint_lambda(const std::string& path, const std::string& lambda_flag) {
  if (!lambda_flag.empty()) return parse_strength(lambda_flag);
  const CheckpointManifest m = read_manifest(path);
  auto it = m.metadata.find("pad_lambda");
  if (it == m.metadata.end())
    throw ValidationError(path +
                          " carries no pad_lambda metadata; pass --lambda to tag its results");
  return parse_strength(it->second);
}

int cmd_eval(const std::string& checkpoint, const std::string& checkpoints_dir,
             const std::string& backend_url, const std::string& lambda_flag,
             const std::vector<std::string>& dataset_paths, const std::string& out_dir,
             std::uint64_t seed, const std::vector<std::string>& style_names, int workers,
             const std::string& norm_name) {
  const int sources = int(!checkpoint.empty()) + int(!checkpoints_dir.empty()) +
                      int(!backend_url.empty());
  if (sources != 1)
    throw ValidationError(
        "pass exactly one of --checkpoint, --checkpoints-dir, or --backend-url "
        "(PAD_BACKEND_URL)");
  if (dataset_paths.empty()) throw ValidationError("no --datasets given");
  if (out_dir.empty()) throw ValidationError("no --out directory given");

  std::vector<Style> styles;
  for (const auto& s : style_names) styles.push_back(style_from_name(trim(s)));
  LengthNorm norm;
  if (norm_name == "log-per-token")
    norm = LengthNorm::LogPerToken;
  else if (norm_name == "prob-division")
    norm = LengthNorm::ProbDivision;
  else
    throw ValidationError("unknown --length-norm '" + norm_name +
                          "' (expected 'log-per-token' or 'prob-division')");

  std::vector<LoadedDataset> datasets;
  for (const auto& path : dataset_paths) {
    datasets.push_back(load_dataset(path));
    for (const auto& w : datasets.back().warnings) std::cerr << "warning: " << w << "\n";
  }

  std::vector<EvalJob> jobs;
  if (!backend_url.empty()) {
    if (lambda_flag.empty())
      throw ValidationError("--backend-url needs --lambda to tag its results");
    jobs.push_back({backend_url, "", parse_strength(lambda_flag)});
  } else if (!checkpoint.empty()) {
    jobs.push_back({"tiny:" + checkpoint, file_digest(checkpoint),
                    checkpoint_lambda(checkpoint, lambda_flag)});
  } else {
    std::vector<std::string> files;
    if (!std::filesystem::is_directory(checkpoints_dir))
      throw IoError("cannot open checkpoints directory '" + checkpoints_dir + "'");
    for (const auto& entry : std::filesystem::directory_iterator(checkpoints_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("lambda_", 0) == 0 && entry.path().extension() == ".safetensors")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw ValidationError("no lambda_*.safetensors checkpoints under " + checkpoints_dir);
    for (const auto& path : files)
      jobs.push_back({"tiny:" + path, file_digest(path), checkpoint_lambda(path, "")});
  }

  for (const auto& job : jobs) {
    EvalOptions o;
    o.backend_spec = job.spec;
    o.backend_digest = job.digest;
    o.lambda = job.lambda;
    o.datasets = datasets;
    o.styles = styles;
    o.seed = seed;
    o.out_dir = out_dir;
    o.workers = workers;
    o.length_norm = norm;
    const auto paths = run_eval(o);
    std::cout << "λ=" << job.lambda.to_string() << ": " << paths.size()
              << " dataset result file(s) under " << out_dir << "/results/"
              << job.lambda.file_tag() << "\n";
  }
  return 0;
}

LambdaCurve parse_win_rates(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot open win-rate file '" + path + "'");
  std::vector<WinRateRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (line_no == 1 && t == "lambda,win_rate") continue;  // optional header
    const std::size_t comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected 'lambda,win_rate'");
    WinRateRecord rec;
    try {
      rec.lambda = Rational::parse(trim(t.substr(0, comma)));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string value = trim(t.substr(comma + 1));
    char* end = nullptr;
    rec.win_rate = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad win rate '" + value +
                            "'");
    records.push_back(rec);
  }
  try {
    return win_rate_curve(records);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

int cmd_report(const std::string& results_dir, const std::string& report_dir,
               const std::string& win_rates_path, double constraint, bool no_base_chat_template) {
  if (constraint >= 0.0 && win_rates_path.empty())
    throw ValidationError("--constraint needs --win-rates to judge feasibility");
  const auto sweep = collect_results(results_dir);
  std::optional<LambdaCurve> win_rates;
  if (!win_rates_path.empty()) win_rates = parse_win_rates(win_rates_path);

  const ReportPaths paths = export_report(report_dir, sweep,
                                          win_rates ? &*win_rates : nullptr,
                                          !no_base_chat_template);

  const LambdaCurve curve = model_curve(sweep);
  SelectionResult best = select_best_lambda(curve);
  std::cout << "best " << format_best(best.best_score, best.lambda_star) << " over "
            << sweep.size() << " strengths\n";

  if (constraint >= 0.0) {
    const SelectionResult c = constrained_select(curve, *win_rates, constraint);
    nlohmann::ordered_json summary;
    {
      std::ifstream in(paths.summary_json, std::ios::binary);
      summary = nlohmann::ordered_json::parse(in);
    }
    nlohmann::ordered_json constrained;
    constrained["max_relative_wr_drop"] = constraint;
    constrained["best"] = c.best_score;
    constrained["lambda_star"] = c.lambda_star.to_eighths();
    if (c.delta_wr)
      constrained["delta_wr"] = *c.delta_wr;
    else
      constrained["delta_wr"] = nullptr;
    summary["constrained"] = constrained;
    std::ofstream out(paths.summary_json, std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << '\n';
    if (!out.good()) throw IoError("failed writing " + paths.summary_json);
    std::cout << "constrained (≤" << constraint * 100.0 << "% win-rate drop): "
              << format_best(c.best_score, c.lambda_star) << "\n";
  }
  std::cout << paths.dataset_csv << "\n" << paths.model_csv << "\n" << paths.summary_json << "\n";
  return 0;
}

int cmd_serve(const std::string& checkpoint, const std::string& host, int port) {
  TinyServer server(TinyLM::load(checkpoint), host, port);
  std::cout << "serving " << checkpoint << " at " << server.url() << "\n" << std::flush;
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "interpolate base/instruct checkpoints at strength λ, evaluate the result on "
      "few-shot tasks, and pick the best strength"};
  app.require_subcommand(1);

  // merge
  auto* merge = app.add_subcommand("merge", "interpolate two checkpoints at one strength");
  std::string m_base, m_instruct, m_lambda, m_out, m_policy = "error";
  merge->add_option("--base", m_base, "base checkpoint")->required();
  merge->add_option("--instruct", m_instruct, "instruct checkpoint")->required();
  merge->add_option("--lambda", m_lambda, "strength in [0,1], e.g. 5/8 or 0.625")->required();
  merge->add_option("--out", m_out, "output checkpoint path")->required();
  merge->add_option("--base-only-policy", m_policy,
                    "tensors only the base model has: 'error' or 'copy-base'");

  // sweep-merge
  auto* sweep = app.add_subcommand("sweep-merge", "merge a whole strength grid");
  std::string s_base, s_instruct, s_out_dir, s_policy = "error";
  std::vector<std::string> s_grid;
  sweep->add_option("--base", s_base, "base checkpoint")->required();
  sweep->add_option("--instruct", s_instruct, "instruct checkpoint")->required();
  sweep->add_option("--out-dir", s_out_dir, "directory for lambda_*.safetensors")->required();
  sweep->add_option("--grid", s_grid, "strengths (default: eighths 0..1)")->delimiter(',');
  sweep->add_option("--base-only-policy", s_policy,
                    "tensors only the base model has: 'error' or 'copy-base'");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a backend on datasets");
  std::string e_checkpoint, e_dir, e_url, e_lambda, e_out, e_norm = "log-per-token";
  std::vector<std::string> e_datasets, e_styles;
  std::uint64_t e_seed = 0;
  int e_workers = 1;
  eval->add_option("--checkpoint", e_checkpoint, "single tiny-model checkpoint");
  eval->add_option("--checkpoints-dir", e_dir, "directory of lambda_*.safetensors");
  eval->add_option("--backend-url", e_url, "remote scoring endpoint")
      ->envname("PAD_BACKEND_URL");
  eval->add_option("--lambda", e_lambda, "strength tag (required for --backend-url)");
  eval->add_option("--datasets", e_datasets, "dataset config files")
      ->required()
      ->delimiter(',');
  eval->add_option("--out", e_out, "output directory for results + manifest")->required();
  eval->add_option("--seed", e_seed, "shot-sampling seed (default 0)");
  eval->add_option("--styles", e_styles, "style filter: mc,fmc,g (default: all declared)")
      ->delimiter(',');
  eval->add_option("--workers", e_workers, "parallel evaluation workers (default 1)")
      ->check(CLI::Range(1, 256));
  eval->add_option("--length-norm", e_norm, "'log-per-token' (default) or 'prob-division'");

  // report
  auto* report = app.add_subcommand("report", "aggregate results into CSVs and a summary");
  std::string r_results, r_dir, r_win_rates;
  double r_constraint = -1.0;
  bool r_no_chat = false;
  report->add_option("--results", r_results, "eval output directory")->required();
  report->add_option("--report-dir", r_dir, "directory for the report files")->required();
  report->add_option("--win-rates", r_win_rates, "CSV of 'lambda,win_rate' rows");
  report->add_option("--constraint", r_constraint,
                     "max relative win-rate drop for constrained selection, e.g. 0.01")
      ->check(CLI::NonNegativeNumber);
  report->add_flag("--no-base-chat-template", r_no_chat,
                   "the base model has no chat template (λ*=0 renders delta_wr as NA)");

  // serve
  auto* serve = app.add_subcommand("serve", "serve a tiny-model checkpoint over HTTP");
  std::string v_checkpoint, v_host = "127.0.0.1";
  int v_port = 0;
  serve->add_option("--checkpoint", v_checkpoint, "tiny-model checkpoint")->required();
  serve->add_option("--host", v_host, "bind address (default 127.0.0.1)");
  serve->add_option("--port", v_port, "port (default: pick a free one)")
      ->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are validation failures
  }

  try {
    if (merge->parsed()) return cmd_merge(m_base, m_instruct, m_lambda, m_out, m_policy);
    if (sweep->parsed()) return cmd_sweep_merge(s_base, s_instruct, s_out_dir, s_grid, s_policy);
    if (eval->parsed())
      return cmd_eval(e_checkpoint, e_dir, e_url, e_lambda, e_datasets, e_out, e_seed, e_styles,
                      e_workers, e_norm);
    if (report->parsed())
      return cmd_report(r_results, r_dir, r_win_rates, r_constraint, r_no_chat);
    if (serve->parsed()) return cmd_serve(v_checkpoint, v_host, v_port);
  } catch (const BackendError& e) {
    std::cerr << "error (backend, " << e.code() << "): " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
