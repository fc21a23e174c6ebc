#include "pad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "json.hpp"
#include "pad/error.hpp"

namespace pad {

namespace {

const Rational kZero(0), kOne(1);

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double point_or_throw(const LambdaCurve& curve, const Rational& lambda, const char* what) {
  auto it = curve.points.find(lambda);
  if (it == curve.points.end())
    throw ValidationError(std::string(what) + " curve is missing the λ=" + lambda.to_string() +
                          " point");
  return it->second;
}

void check_lambda_range(const Rational& lambda) {
  if (lambda < kZero || kOne < lambda)
    throw ValidationError("strength λ=" + lambda.to_string() + " is outside [0, 1]");
}

}  // namespace

bool EvalKey::operator<(const EvalKey& o) const {
  return std::tie(tmpl, style, normalization) < std::tie(o.tmpl, o.style, o.normalization);
}

DatasetScore aggregate_dataset(const std::string& dataset,
                               const std::map<EvalKey, double>& per_evaluation) {
  if (per_evaluation.empty())
    throw ValidationError("dataset '" + dataset + "' has no evaluation scores to aggregate");
  DatasetScore out;
  out.dataset = dataset;
  out.per_evaluation = per_evaluation;
  out.aggregate = per_evaluation.begin()->second;
  for (const auto& [key, value] : per_evaluation) out.aggregate = std::max(out.aggregate, value);
  return out;
}

ModelScore aggregate_model(const Rational& lambda, std::vector<DatasetScore> dataset_scores) {
  if (dataset_scores.empty())
    throw ValidationError("model aggregation needs at least one dataset score");
  std::sort(dataset_scores.begin(), dataset_scores.end(),
            [](const DatasetScore& a, const DatasetScore& b) { return a.dataset < b.dataset; });
  for (std::size_t i = 1; i < dataset_scores.size(); ++i)
    if (dataset_scores[i].dataset == dataset_scores[i - 1].dataset)
      throw ValidationError("duplicate dataset '" + dataset_scores[i].dataset +
                            "' in one model score");
  ModelScore out;
  out.lambda = lambda;
  double sum = 0.0;
  for (const auto& d : dataset_scores) sum += d.aggregate;
  out.aggregate = sum / static_cast<double>(dataset_scores.size());
  out.dataset_scores = std::move(dataset_scores);
  return out;
}

LambdaCurve model_curve(const std::vector<ModelScore>& sweep) {
  if (sweep.empty()) throw ValidationError("cannot build a curve from an empty sweep");
  LambdaCurve curve;
  curve.kind = CurveKind::ICL;
  std::vector<std::string> roster;
  Rational roster_lambda;
  for (const auto& m : sweep) {
    check_lambda_range(m.lambda);
    if (!curve.points.emplace(m.lambda, m.aggregate).second)
      throw ValidationError("strength λ=" + m.lambda.to_string() + " appears twice in the sweep");
    std::vector<std::string> names;
    for (const auto& d : m.dataset_scores) names.push_back(d.dataset);
    std::sort(names.begin(), names.end());
    if (roster.empty()) {
      roster = names;
      roster_lambda = m.lambda;
    } else if (names != roster) {
      throw ValidationError("dataset roster at λ=" + m.lambda.to_string() +
                            " differs from the roster at λ=" + roster_lambda.to_string());
    }
  }
  return curve;
}

LambdaCurve win_rate_curve(const std::vector<WinRateRecord>& records) {
  if (records.empty()) throw ValidationError("no win-rate records");
  LambdaCurve curve;
  curve.kind = CurveKind::WinRate;
  for (const auto& r : records) {
    check_lambda_range(r.lambda);
    if (r.win_rate < 0.0 || r.win_rate > 100.0)
      throw ValidationError("win rate " + fmt(r.win_rate) + " at λ=" + r.lambda.to_string() +
                            " is outside [0, 100]");
    if (!curve.points.emplace(r.lambda, r.win_rate).second)
      throw ValidationError("strength λ=" + r.lambda.to_string() +
                            " appears twice in the win-rate records");
  }
  return curve;
}

LambdaCurve fractional_difference(const LambdaCurve& curve) {
  const double s1 = point_or_throw(curve, kOne, "fractional-difference");
  if (!(s1 > 0.0))
    throw ValidationError("fractional differences need a positive score at λ=1, got " + fmt(s1));
  LambdaCurve out;
  out.kind = curve.kind;
  for (const auto& [lambda, score] : curve.points)
    out.points[lambda] = lambda == kOne ? 0.0 : 100.0 * (score - s1) / s1;
  return out;
}

SelectionResult select_best_lambda(const LambdaCurve& curve) {
  if (curve.points.empty()) throw ValidationError("cannot select a strength from an empty curve");
  SelectionResult sel;
  bool first = true;
  for (const auto& [lambda, score] : curve.points) {  // ascending λ; >= keeps the largest
    if (first || score >= sel.best_score) {
      sel.lambda_star = lambda;
      sel.best_score = score;
      first = false;
    }
  }
  return sel;
}

std::optional<double> delta_win_rate(const LambdaCurve& win_rates, const Rational& lambda_star,
                                     bool base_has_chat_template) {
  if (lambda_star == kZero && !base_has_chat_template) return std::nullopt;
  const double wr_star = point_or_throw(win_rates, lambda_star, "win-rate");
  const double wr_one = point_or_throw(win_rates, kOne, "win-rate");
  return wr_star - wr_one;
}

SelectionResult constrained_select(const LambdaCurve& icl_curve, const LambdaCurve& wr_curve,
                                   double max_relative_wr_drop) {
  if (std::isnan(max_relative_wr_drop) || max_relative_wr_drop < 0.0)
    throw ValidationError("the win-rate drop budget must be non-negative");
  point_or_throw(icl_curve, kOne, "constrained-selection ICL");
  const double wr_one = point_or_throw(wr_curve, kOne, "constrained-selection win-rate");

  auto feasible = [&](const Rational& lambda) {
    if (lambda == kOne) return true;  // no drop relative to itself
    auto it = wr_curve.points.find(lambda);
    if (it == wr_curve.points.end()) return false;  // no win rate, e.g. a template-less base
    if (wr_one <= 0.0) return true;                 // nothing to drop from
    if (std::isinf(max_relative_wr_drop)) return true;
    return it->second >= wr_one * (1.0 - max_relative_wr_drop);
  };

  SelectionResult sel;
  bool first = true;
  for (const auto& [lambda, score] : icl_curve.points) {
    if (!feasible(lambda)) continue;
    if (first || score >= sel.best_score) {
      sel.lambda_star = lambda;
      sel.best_score = score;
      first = false;
    }
  }
  // λ=1 is always feasible, so the set was never empty
  sel.delta_wr = point_or_throw(wr_curve, sel.lambda_star, "win-rate") - wr_one;
  return sel;
}

std::string format_best(double score, const Rational& lambda) {
  return fmt(score, "%.1f") + " (λ=" + lambda.to_eighths() + ")";
}

ReportPaths export_report(const std::string& dir, const std::vector<ModelScore>& sweep,
                          const LambdaCurve* win_rates, bool base_has_chat_template) {
  LambdaCurve curve = model_curve(sweep);
  point_or_throw(curve, kZero, "report model");
  point_or_throw(curve, kOne, "report model");
  LambdaCurve frac = fractional_difference(curve);
  SelectionResult sel = select_best_lambda(curve);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir + "': " + ec.message());

  ReportPaths paths;
  paths.dataset_csv = dir + "/dataset_scores.csv";
  paths.model_csv = dir + "/model_scores.csv";
  paths.summary_json = dir + "/summary.json";

  std::vector<const ModelScore*> ordered;
  for (const auto& m : sweep) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const ModelScore* a, const ModelScore* b) { return a->lambda < b->lambda; });

  {
    std::ofstream out(paths.dataset_csv, std::ios::binary | std::ios::trunc);
    out << "lambda,dataset,style,normalization,score\n";
    for (const ModelScore* m : ordered) {
      for (const auto& d : m->dataset_scores) {
        // collapse templates: best score per (style, normalization)
        std::map<std::pair<std::string, std::string>, double> combos;
        for (const auto& [key, value] : d.per_evaluation) {
          auto k = std::make_pair(std::string(style_name(key.style)), key.normalization);
          auto [it, fresh] = combos.emplace(k, value);
          if (!fresh) it->second = std::max(it->second, value);
        }
        for (const auto& [combo, value] : combos)
          out << fmt(m->lambda.value()) << ',' << d.dataset << ',' << combo.first << ','
              << combo.second << ',' << fmt(value) << '\n';
      }
    }
    if (!out.good()) throw IoError("failed writing " + paths.dataset_csv);
  }
  {
    std::ofstream out(paths.model_csv, std::ios::binary | std::ios::trunc);
    out << "lambda,model_score,frac_diff_pct\n";
    for (const auto& [lambda, score] : curve.points)
      out << fmt(lambda.value()) << ',' << fmt(score) << ',' << fmt(frac.points.at(lambda))
          << '\n';
    if (!out.good()) throw IoError("failed writing " + paths.model_csv);
  }
  {
    nlohmann::ordered_json summary;
    summary["base"] = curve.points.at(kZero);
    summary["instruct"] = curve.points.at(kOne);
    summary["best"] = sel.best_score;
    summary["lambda_star"] = sel.lambda_star.to_eighths();
    if (win_rates) {
      auto delta = delta_win_rate(*win_rates, sel.lambda_star, base_has_chat_template);
      if (delta)
        summary["delta_wr"] = *delta;
      else
        summary["delta_wr"] = nullptr;
    } else {
      summary["delta_wr"] = nullptr;
    }
    std::ofstream out(paths.summary_json, std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << '\n';
    if (!out.good()) throw IoError("failed writing " + paths.summary_json);
  }
  return paths;
}

}  // namespace pad
