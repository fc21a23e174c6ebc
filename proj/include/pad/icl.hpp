#pragma once

// Few-shot prompt rendering and the three evaluation styles.
//
// MC  — every choice string is scored as a continuation of the prompt and
//       ranked under three normalizations (none, per-token, prefix-calibrated).
// FMC — choices are shown as a bulleted list "A. …" and only the bullet
//       letters are scored.
// G   — the model generates freely and the output is parsed to a string.
//
// Templates use a small substitution language:
//   {field}            value from the instance's field map
//   {answer}           the gold answer (shot scope); the scoring slot (target)
//   {answer_letter}    bullet letter of the gold choice, same scoping
//   {choices}          bulleted choice list, "A. …" one per line
//   {#shots}…{/shots}  block repeated once per sampled shot, in order
//   {{  }}             literal braces
//   |||                calibration split marker, at most once
//
// The full prompt is the rendered body with "|||" removed. The calibration
// prefix is the text after the split point (back to the preceding line break),
// rendered with answer/choice content blanked, and is scored with an empty
// context to produce the N_prior denominator.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pad/backend.hpp"

namespace pad {

enum class Style { MC, FMC, G };

const char* style_name(Style s);
Style style_from_name(const std::string& name);  // accepts "mc", "MC", …

struct TemplateSpec {
  std::string name;  // used in result keys and reports
  Style style = Style::MC;
  std::string body;

  bool has_calibration_marker() const { return body.find("|||") != std::string::npos; }
};

struct TaskInstance {
  std::string id;
  std::map<std::string, std::string> fields;
  std::vector<std::string> choices;     // MC/FMC
  int gold_index = -1;                  // index into choices, MC/FMC
  std::vector<std::string> gold_texts;  // gold answers for G (one or more)
  std::string group;

  // The demonstration answer written into shot blocks.
  const std::string& answer_text() const;
};

struct DatasetSpec {
  std::string name;
  int shots = 0;
  std::vector<Style> styles;
  std::vector<TemplateSpec> templates;
  std::string metric;       // one of the metric kind names
  std::string group_field;  // instance field feeding TaskInstance::group
  std::vector<TaskInstance> examples;

  // Throws ValidationError on structural problems (duplicate ids, gold index
  // out of range, a declared style with no template, …).
  void validate() const;
};

struct RenderedPrompt {
  std::string full_prompt;         // body rendered, "|||" removed
  std::string calibration_prefix;  // empty when the template has no marker
  // MC: the choice strings; FMC: the bullet letters; G: empty.
  std::vector<std::string> choice_continuations;
};

struct ChoiceScore {
  std::string choice;
  double raw_logprob = 0.0;    // log P(choice | prompt)
  int token_count = 0;
  double prefix_logprob = 0.0; // log P(prefix), identical across choices
};

// How N_length is applied. The per-token average in log space is the default;
// the literal probability-by-count division is kept behind this switch because
// the two only rank identically when token counts are equal.
enum class LengthNorm { LogPerToken, ProbDivision };

struct McPrediction {
  int base = -1;
  int length = -1;
  int prior = -1;  // -1 when no calibration prefix is available
};

struct McResult {
  McPrediction pred;
  std::vector<ChoiceScore> scores;
};

// Stable per-target seed: mixes the run seed with dataset name and target id
// so adding a dataset never perturbs another dataset's shots.
std::uint64_t shot_seed(std::uint64_t run_seed, const std::string& dataset_name,
                        const std::string& target_id);

// Draws dataset.shots examples without replacement, excluding the target,
// deterministically for a given (seed, dataset name, target id).
std::vector<TaskInstance> sample_shots(const DatasetSpec& dataset, const TaskInstance& target,
                                       std::uint64_t seed);

RenderedPrompt render(const TemplateSpec& tmpl, const std::vector<TaskInstance>& shots,
                      const TaskInstance& target);

// Pure ranking over already-collected scores; ties break to the lowest index.
McPrediction rank_choices(const std::vector<ChoiceScore>& scores, bool have_prefix,
                          LengthNorm norm = LengthNorm::LogPerToken);

McResult eval_mc(const RenderedPrompt& rendered, Backend& backend,
                 LengthNorm norm = LengthNorm::LogPerToken);

int eval_fmc(const RenderedPrompt& rendered, Backend& backend);

// Parser profiles: "default" (trim, cut at first newline, strip one layer of
// surrounding quotes) and "finqa" (default, then keep the first numeric token
// with "$", ",", "%" stripped; the default-parsed text when none is found).
std::string parse_generation(const std::string& text, const std::string& profile);

std::string eval_g(const RenderedPrompt& rendered, Backend& backend, const std::string& profile,
                   int max_tokens);

// First numeric token of `text` with "$", ",", "%" removed and trailing dots
// dropped; empty string when there is none. Shared with the Fin QA metrics.
std::string extract_number_token(const std::string& text);

}  // namespace pad
