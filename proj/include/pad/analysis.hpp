// Aggregation and strength-curve analysis.
//
// Scores roll up in two steps: a dataset's evaluations (one value per
// template × style × normalization) aggregate by MAX, and a model's dataset
// scores aggregate by unweighted MEAN. Model scores across the strength grid
// form a curve; the analysis picks the best strength λ* (ties toward the
// LARGEST λ), computes fractional differences against the λ=1 endpoint, and
// applies an optional instruction-following constraint: restrict to strengths
// whose win rate stays within a relative drop budget of the λ=1 win rate,
// then maximize the curve over that feasible set.
//
// delta_win_rate reports the absolute win-rate difference wr(λ*) − wr(1) in
// percentage points; it is NA (std::nullopt) when λ*=0 and the λ=0 model has
// no chat template to evaluate win rates with.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pad/icl.hpp"
#include "pad/rational.hpp"

namespace pad {

// One evaluation cell of a dataset: a template scored under a style and, for
// MC, a normalization ("base", "length", "prior"; empty for FMC/G).
struct EvalKey {
  std::string tmpl;
  Style style = Style::MC;
  std::string normalization;

  bool operator<(const EvalKey& o) const;
};

struct DatasetScore {
  std::string dataset;
  std::map<EvalKey, double> per_evaluation;
  double aggregate = 0.0;  // max over per_evaluation
};

struct ModelScore {
  Rational lambda;
  std::vector<DatasetScore> dataset_scores;  // sorted by dataset name
  double aggregate = 0.0;                    // mean over dataset aggregates
};

enum class CurveKind { ICL, WinRate };

struct LambdaCurve {
  std::map<Rational, double> points;
  CurveKind kind = CurveKind::ICL;
};

struct SelectionResult {
  Rational lambda_star;
  double best_score = 0.0;
  std::optional<double> delta_wr;  // nullopt = not computed / NA
};

struct WinRateRecord {
  Rational lambda;
  double win_rate = 0.0;  // in [0, 100]
  std::string judge;
  std::string baseline;
};

// Max-aggregate one dataset's evaluation cells. Throws on empty input.
DatasetScore aggregate_dataset(const std::string& dataset,
                               const std::map<EvalKey, double>& per_evaluation);

// Mean-aggregate a model's dataset scores (sorted by name). Throws on empty
// input or duplicate dataset names.
ModelScore aggregate_model(const Rational& lambda, std::vector<DatasetScore> dataset_scores);

// Model-level curve over a sweep. Throws if the sweep is empty, a λ repeats
// or leaves [0,1], or the dataset roster differs between two strengths.
LambdaCurve model_curve(const std::vector<ModelScore>& sweep);

// Win-rate curve from ingested records. Throws on out-of-range values or
// duplicate strengths.
LambdaCurve win_rate_curve(const std::vector<WinRateRecord>& records);

// 100 × (s_λ − s_1) / s_1 per point; exactly 0 at λ=1. Throws when the curve
// has no λ=1 point or its score is not positive.
LambdaCurve fractional_difference(const LambdaCurve& curve);

// Argmax over the curve, ties toward the largest λ. delta_wr left unset.
SelectionResult select_best_lambda(const LambdaCurve& curve);

// wr(λ*) − wr(1) in absolute points, or nullopt when λ*=0 and
// base_has_chat_template is false. Throws when a required point is missing.
std::optional<double> delta_win_rate(const LambdaCurve& win_rates, const Rational& lambda_star,
                                     bool base_has_chat_template);

// Best ICL score over strengths whose win rate satisfies
// wr(λ) ≥ wr(1) × (1 − max_relative_wr_drop); λ=1 is always feasible. Ties
// toward the largest λ. delta_wr is filled from the win-rate curve.
SelectionResult constrained_select(const LambdaCurve& icl_curve, const LambdaCurve& wr_curve,
                                   double max_relative_wr_drop);

// Table-style cell: "52.8 (λ=5/8)" — one decimal, eighths grid rendering.
std::string format_best(double score, const Rational& lambda);

// Deterministic report files under dir:
//   dataset_scores.csv  lambda,dataset,style,normalization,score
//                       (score = max over templates per combination)
//   model_scores.csv    lambda,model_score,frac_diff_pct
//   summary.json        {base, instruct, best, lambda_star, delta_wr}
// win_rates may be null; delta_wr is then null in the JSON, as it is for the
// NA rule. Returns the three file paths written.
struct ReportPaths {
  std::string dataset_csv;
  std::string model_csv;
  std::string summary_json;
};
ReportPaths export_report(const std::string& dir, const std::vector<ModelScore>& sweep,
                          const LambdaCurve* win_rates, bool base_has_chat_template);

}  // namespace pad
