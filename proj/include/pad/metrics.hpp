// Task metrics. Every metric maps a list of scored records to a value on a
// 0..100 scale.
//
// A ScoredRecord is one evaluated example. Which fields matter depends on the
// metric:
//   - label metrics (accuracy, weighted_f1): `prediction` vs `golds[0]`
//     (accuracy accepts a match against any listed gold);
//   - string metrics (string_f1, finqa_f1, finqa_accuracy): `prediction`
//     vs the `golds` strings;
//   - entity extraction (f1): `predicted_list` vs `golds` as entity lists,
//     one record per (example, entity_type);
//   - avg_weighted_f1 additionally requires `group` on every record.
//
// String comparison uses the SQuAD answer normalization: lowercase, drop
// ASCII punctuation, drop the articles a/an/the, collapse whitespace. The
// FinQA metrics branch on the gold: numeric golds compare extracted numbers
// with 1e-6 absolute tolerance ("50%" and "0.5" are NOT equated), yes/no
// golds compare the first word of the prediction case-insensitively, and
// anything else falls back to string F1 (finqa_f1) or normalized exact match
// (finqa_accuracy).
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pad {

struct ScoredRecord {
  std::string prediction;                   // predicted label or answer string
  std::vector<std::string> golds;           // gold label(s) / answer(s) / entity list
  std::vector<std::string> predicted_list;  // predicted entity list (metric "f1")
  std::string group;                        // grouping key for avg_weighted_f1
  std::string entity_type;                  // entity type for metric "f1" records
};

struct MetricResult {
  double value = 0.0;      // in [0, 100]
  std::size_t support = 0; // number of records scored
};

// SQuAD answer normalization, exposed for tests.
std::string squad_normalize(const std::string& s);

// Per-pair scores in [0, 100].
double string_f1(const std::string& prediction, const std::vector<std::string>& golds);
double finqa_f1(const std::string& prediction, const std::string& gold);
double finqa_accuracy(const std::string& prediction, const std::string& gold);

// Dataset-level metrics. All throw ValidationError on empty input.
MetricResult accuracy(const std::vector<ScoredRecord>& records);
MetricResult weighted_f1(const std::vector<ScoredRecord>& records);
MetricResult ner_f1(const std::vector<ScoredRecord>& records);
MetricResult avg_weighted_f1(const std::vector<ScoredRecord>& records);

// Dispatch on a metric kind name: "accuracy", "weighted_f1", "f1" (entity
// micro F1), "string_f1", "finqa_f1", "finqa_accuracy", "avg_weighted_f1".
// The three string metrics aggregate per-record scores by their mean.
MetricResult evaluate_metric(const std::string& kind, const std::vector<ScoredRecord>& records);
bool is_known_metric(const std::string& kind);

}  // namespace pad
