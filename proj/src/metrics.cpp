#include "pad/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>

#include "pad/error.hpp"
#include "pad/icl.hpp"

namespace pad {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Multiset intersection size of two token bags.
std::size_t bag_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : a) ++counts[t];
  std::size_t same = 0;
  for (const auto& t : b) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  return same;
}

double f1_from_counts(std::size_t tp, std::size_t n_pred, std::size_t n_gold) {
  if (n_pred == 0 || n_gold == 0 || tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(n_pred);
  const double recall = static_cast<double>(tp) / static_cast<double>(n_gold);
  return 2.0 * precision * recall / (precision + recall);
}

double pair_f1(const std::string& prediction, const std::string& gold) {
  auto p = split_ws(squad_normalize(prediction));
  auto g = split_ws(squad_normalize(gold));
  if (p.empty() && g.empty()) return 100.0;
  return 100.0 * f1_from_counts(bag_overlap(g, p), p.size(), g.size());
}

// Full-string numeric parse after canonicalization ("$", ",", "%" stripped,
// trailing dots dropped); nullopt when the text is not a number.
std::optional<double> parse_full_number(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return std::nullopt;
  std::size_t e = s.find_last_not_of(" \t\r\n");
  std::string canon;
  for (std::size_t i = b; i <= e; ++i) {
    char c = s[i];
    if (c != '$' && c != ',' && c != '%') canon += c;
  }
  while (!canon.empty() && canon.back() == '.') canon.pop_back();
  if (canon.empty()) return std::nullopt;
  const char* text = canon.c_str();
  char* end = nullptr;
  double v = std::strtod(text, &end);
  if (end != text + canon.size()) return std::nullopt;
  return v;
}

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string first_word(const std::string& s) {
  auto toks = split_ws(s);
  if (toks.empty()) return "";
  std::string w = toks.front();
  std::size_t b = 0, e = w.size();
  while (b < e && is_ascii_punct(static_cast<unsigned char>(w[b]))) ++b;
  while (e > b && is_ascii_punct(static_cast<unsigned char>(w[e - 1]))) --e;
  return lowercase(w.substr(b, e - b));
}

const ScoredRecord& checked(const std::vector<ScoredRecord>& records, const char* metric) {
  if (records.empty())
    throw ValidationError(std::string(metric) + " needs at least one record");
  return records.front();
}

std::string gold_label(const ScoredRecord& r, std::size_t index) {
  if (r.golds.empty())
    throw ValidationError("record " + std::to_string(index) + " has no gold value");
  return r.golds.front();
}

// weighted F1 over plain (gold, pred) label pairs
double weighted_f1_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  struct Counts {
    std::size_t tp = 0, pred = 0, gold = 0;
  };
  std::map<std::string, Counts> by_label;
  for (const auto& [g, p] : pairs) {
    auto& cg = by_label[g];
    ++cg.gold;
    ++by_label[p].pred;
    if (g == p) ++by_label[g].tp;
  }
  const double n = static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& [label, c] : by_label) {
    const double weight = static_cast<double>(c.gold) / n;
    total += weight * f1_from_counts(c.tp, c.pred, c.gold);
  }
  return 100.0 * total;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

std::string squad_normalize(const std::string& s) {
  // lowercase, drop ASCII punctuation, drop article tokens, collapse spaces
  std::string stripped;
  stripped.reserve(s.size());
  for (unsigned char c : s) {
    if (is_ascii_punct(c)) continue;
    stripped += static_cast<char>(std::tolower(c));
  }
  std::string out;
  for (const auto& tok : split_ws(stripped)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

double string_f1(const std::string& prediction, const std::vector<std::string>& golds) {
  if (golds.empty()) throw ValidationError("string_f1 needs at least one gold answer");
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, pair_f1(prediction, g));
  return best;
}

namespace {

// Shared FinQA branching; the text fallback differs between the two metrics.
double finqa_score(const std::string& prediction, const std::string& gold, bool exact_match) {
  if (auto gnum = parse_full_number(gold)) {
    auto pnum = parse_full_number(extract_number_token(prediction));
    if (!pnum) return 0.0;
    return std::abs(*pnum - *gnum) <= 1e-6 ? 100.0 : 0.0;
  }
  std::size_t b = gold.find_first_not_of(" \t\r\n");
  std::string trimmed =
      b == std::string::npos ? "" : lowercase(gold.substr(b, gold.find_last_not_of(" \t\r\n") - b + 1));
  if (trimmed == "yes" || trimmed == "no")
    return first_word(prediction) == trimmed ? 100.0 : 0.0;
  if (exact_match)
    return squad_normalize(prediction) == squad_normalize(gold) ? 100.0 : 0.0;
  return string_f1(prediction, {gold});
}

}  // namespace

double finqa_f1(const std::string& prediction, const std::string& gold) {
  return finqa_score(prediction, gold, false);
}

double finqa_accuracy(const std::string& prediction, const std::string& gold) {
  return finqa_score(prediction, gold, true);
}

MetricResult accuracy(const std::vector<ScoredRecord>& records) {
  checked(records, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    gold_label(records[i], i);
    const auto& r = records[i];
    if (std::find(r.golds.begin(), r.golds.end(), r.prediction) != r.golds.end()) ++hits;
  }
  return {100.0 * static_cast<double>(hits) / static_cast<double>(records.size()),
          records.size()};
}

MetricResult weighted_f1(const std::vector<ScoredRecord>& records) {
  checked(records, "weighted_f1");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < records.size(); ++i)
    pairs.emplace_back(gold_label(records[i], i), records[i].prediction);
  return {weighted_f1_pairs(pairs), records.size()};
}

MetricResult ner_f1(const std::vector<ScoredRecord>& records) {
  checked(records, "f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : records) {
    const std::size_t overlap = bag_overlap(r.golds, r.predicted_list);
    tp += overlap;
    fp += r.predicted_list.size() - overlap;
    fn += r.golds.size() - overlap;
  }
  if (tp + fp + fn == 0) return {100.0, records.size()};
  return {100.0 * f1_from_counts(tp, tp + fp, tp + fn), records.size()};
}

MetricResult avg_weighted_f1(const std::vector<ScoredRecord>& records) {
  checked(records, "avg_weighted_f1");
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.group.empty())
      throw ValidationError("record " + std::to_string(i) +
                            " is missing the group required by avg_weighted_f1");
    groups[r.group].emplace_back(gold_label(r, i), r.prediction);
  }
  std::vector<double> scores;
  for (const auto& [name, pairs] : groups) scores.push_back(weighted_f1_pairs(pairs));
  return {mean_of(scores), records.size()};
}

MetricResult evaluate_metric(const std::string& kind, const std::vector<ScoredRecord>& records) {
  if (kind == "accuracy") return accuracy(records);
  if (kind == "weighted_f1") return weighted_f1(records);
  if (kind == "f1") return ner_f1(records);
  if (kind == "avg_weighted_f1") return avg_weighted_f1(records);
  if (kind == "string_f1" || kind == "finqa_f1" || kind == "finqa_accuracy") {
    checked(records, kind.c_str());
    std::vector<double> scores;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (kind == "string_f1") {
        if (r.golds.empty())
          throw ValidationError("record " + std::to_string(i) + " has no gold value");
        scores.push_back(string_f1(r.prediction, r.golds));
      } else {
        const std::string gold = gold_label(r, i);
        scores.push_back(kind == "finqa_f1" ? finqa_f1(r.prediction, gold)
                                            : finqa_accuracy(r.prediction, gold));
      }
    }
    return {mean_of(scores), records.size()};
  }
  throw ValidationError("unknown metric '" + kind +
                        "' (expected accuracy, weighted_f1, f1, string_f1, finqa_f1, "
                        "finqa_accuracy, or avg_weighted_f1)");
}

bool is_known_metric(const std::string& kind) {
  static const char* names[] = {"accuracy",  "weighted_f1",    "f1",
                                "string_f1", "finqa_f1",       "finqa_accuracy",
                                "avg_weighted_f1"};
  for (const char* n : names)
    if (kind == n) return true;
  return false;
}

}  // namespace pad
