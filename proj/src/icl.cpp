#include "pad/icl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "pad/checkpoint.hpp"
#include "pad/error.hpp"

namespace pad {

namespace {

constexpr const char* kLoopOpen = "{#shots}";
constexpr const char* kLoopClose = "{/shots}";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string letter_for(int index) {
  if (index < 0 || index >= 26)
    throw ValidationError("bullet letters cover at most 26 choices (got index " +
                          std::to_string(index) + ")");
  return std::string(1, static_cast<char>('A' + index));
}

std::string bullet_list(const TaskInstance& inst) {
  if (inst.choices.empty())
    throw ValidationError("instance '" + inst.id + "' has no choices for {choices}");
  std::string out;
  for (std::size_t i = 0; i < inst.choices.size(); ++i) {
    if (i != 0) out += '\n';
    out += letter_for(static_cast<int>(i)) + ". " + inst.choices[i];
  }
  return out;
}

struct BodyParts {
  std::string before, block, after;
  bool has_loop = false;
};

BodyParts split_loop(const std::string& body) {
  BodyParts p;
  const std::size_t open_len = std::strlen(kLoopOpen);
  const std::size_t close_len = std::strlen(kLoopClose);
  std::size_t open = body.find(kLoopOpen);
  std::size_t close = body.find(kLoopClose);
  if (open == std::string::npos) {
    if (close != std::string::npos)
      throw ValidationError("malformed shot loop: {/shots} without {#shots}");
    p.after = body;
    return p;
  }
  if (body.find(kLoopOpen, open + open_len) != std::string::npos)
    throw ValidationError("malformed shot loop: more than one {#shots} block");
  if (close == std::string::npos || close < open)
    throw ValidationError("malformed shot loop: {#shots} without a matching {/shots}");
  if (body.find(kLoopClose, close + close_len) != std::string::npos)
    throw ValidationError("malformed shot loop: more than one {/shots}");
  p.has_loop = true;
  p.before = body.substr(0, open);
  p.block = body.substr(open + open_len, close - open - open_len);
  p.after = body.substr(close + close_len);
  return p;
}

enum class Scope { Shot, Target };

struct RenderState {
  bool blank_answers = false;  // calibration-prefix pass
  bool slot_seen = false;      // target answer slot encountered
  std::size_t slot_pos = 0;    // output offset of the slot
};

void render_text(const std::string& text, const TaskInstance& inst, Scope scope, RenderState& st,
                 std::string& out) {
  for (std::size_t i = 0; i < text.size();) {
    char c = text[i];
    if (c == '{') {
      if (i + 1 < text.size() && text[i + 1] == '{') {
        out += '{';
        i += 2;
        continue;
      }
      std::size_t end = text.find('}', i + 1);
      if (end == std::string::npos) throw ValidationError("unterminated placeholder in template");
      std::string key = text.substr(i + 1, end - i - 1);
      i = end + 1;
      if (key == "#shots" || key == "/shots")
        throw ValidationError("malformed shot loop: stray {" + key + "}");
      if (key == "answer" || key == "answer_letter") {
        if (st.blank_answers) continue;
        if (scope == Scope::Shot) {
          if (key == "answer") {
            out += inst.answer_text();
          } else {
            if (inst.gold_index < 0)
              throw ValidationError("instance '" + inst.id +
                                    "' has no gold choice for {answer_letter}");
            out += letter_for(inst.gold_index);
          }
        } else {
          if (st.slot_seen)
            throw ValidationError("template has more than one target answer slot");
          st.slot_seen = true;
          st.slot_pos = out.size();
        }
        continue;
      }
      if (key == "choices") {
        if (st.blank_answers) continue;
        out += bullet_list(inst);
        continue;
      }
      auto it = inst.fields.find(key);
      if (it == inst.fields.end())
        throw ValidationError("unknown placeholder '{" + key + "}' for instance '" + inst.id +
                              "'");
      out += it->second;
      continue;
    }
    if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      out += '}';
      i += 2;
      continue;
    }
    out += c;
    ++i;
  }
}

// Uniform draw in [0, n) by rejection; mt19937_64 output is fully specified,
// so results are identical across standard libraries (uniform_int_distribution
// is not).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    std::uint64_t v = rng();
    if (v >= threshold) return v % n;
  }
}

}  // namespace

const char* style_name(Style s) {
  switch (s) {
    case Style::MC: return "MC";
    case Style::FMC: return "FMC";
    case Style::G: return "G";
  }
  return "?";
}

Style style_from_name(const std::string& name) {
  std::string u;
  for (char c : name) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "MC") return Style::MC;
  if (u == "FMC") return Style::FMC;
  if (u == "G") return Style::G;
  throw ValidationError("unknown evaluation style '" + name + "' (expected MC, FMC, or G)");
}

const std::string& TaskInstance::answer_text() const {
  if (gold_index >= 0) {
    if (gold_index >= static_cast<int>(choices.size()))
      throw ValidationError("instance '" + id + "': gold index " + std::to_string(gold_index) +
                            " out of range (" + std::to_string(choices.size()) + " choices)");
    return choices[static_cast<std::size_t>(gold_index)];
  }
  if (!gold_texts.empty()) return gold_texts.front();
  throw ValidationError("instance '" + id + "' has no gold answer");
}

void DatasetSpec::validate() const {
  if (name.empty()) throw ValidationError("dataset has no name");
  if (shots < 0) throw ValidationError("dataset '" + name + "': shots must be non-negative");
  if (examples.empty()) throw ValidationError("dataset '" + name + "' has no examples");
  if (styles.empty()) throw ValidationError("dataset '" + name + "' declares no styles");
  for (Style s : styles) {
    bool found = false;
    for (const auto& t : templates) found = found || t.style == s;
    if (!found)
      throw ValidationError("dataset '" + name + "' declares style " + style_name(s) +
                            " but has no template for it");
  }
  for (const auto& t : templates) {
    std::size_t m = t.body.find("|||");
    if (m != std::string::npos && t.body.find("|||", m + 3) != std::string::npos)
      throw ValidationError("template '" + t.name + "' contains more than one '|||' marker");
    if (t.style == Style::FMC && t.body.find("{choices}") == std::string::npos)
      throw ValidationError("FMC template '" + t.name + "' must list the bullets via {choices}");
  }
  bool has_choice_style = false, has_fmc = false, has_g = false;
  for (Style s : styles) {
    has_choice_style = has_choice_style || s == Style::MC || s == Style::FMC;
    has_fmc = has_fmc || s == Style::FMC;
    has_g = has_g || s == Style::G;
  }
  std::set<std::string> ids;
  for (const auto& ex : examples) {
    if (ex.id.empty()) throw ValidationError("dataset '" + name + "': example with empty id");
    if (!ids.insert(ex.id).second)
      throw ValidationError("dataset '" + name + "': duplicate example id '" + ex.id + "'");
    if (has_choice_style) {
      if (ex.choices.empty())
        throw ValidationError("example '" + ex.id + "' has no choices for a choice style");
      if (ex.gold_index < 0 || ex.gold_index >= static_cast<int>(ex.choices.size()))
        throw ValidationError("example '" + ex.id + "': gold index " +
                              std::to_string(ex.gold_index) + " out of range (" +
                              std::to_string(ex.choices.size()) + " choices)");
      for (const auto& c : ex.choices)
        if (c.empty()) throw ValidationError("example '" + ex.id + "' has an empty choice");
    }
    if (has_fmc) {
      if (ex.choices.size() < 2)
        throw ValidationError("example '" + ex.id + "' needs at least 2 choices for FMC");
      if (ex.choices.size() > 26)
        throw ValidationError("example '" + ex.id + "' has " +
                              std::to_string(ex.choices.size()) +
                              " choices; FMC bullets cover at most 26");
    }
    if (has_g && ex.gold_texts.empty() && ex.gold_index < 0)
      throw ValidationError("example '" + ex.id + "' has no gold answer for style G");
    if (metric == "avg_weighted_f1" && ex.group.empty())
      throw ValidationError("example '" + ex.id + "' is missing a group (required by " + metric +
                            ")");
  }
  if (static_cast<std::size_t>(shots) + 1 > examples.size())
    throw ValidationError("dataset '" + name + "': " + std::to_string(shots) +
                          " shots need at least " + std::to_string(shots + 1) + " examples, have " +
                          std::to_string(examples.size()));
}

std::uint64_t shot_seed(std::uint64_t run_seed, const std::string& dataset_name,
                        const std::string& target_id) {
  // Length-prefixed chaining so (name, id) pairs never collide by shifting
  // bytes between the two strings.
  unsigned char buf[8];
  auto put_u64 = [&](std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return fnv1a64(buf, 8, h);
  };
  std::uint64_t h = put_u64(run_seed, 14695981039346656037ull);
  h = put_u64(dataset_name.size(), h);
  h = fnv1a64(dataset_name.data(), dataset_name.size(), h);
  h = put_u64(target_id.size(), h);
  h = fnv1a64(target_id.data(), target_id.size(), h);
  return h;
}

std::vector<TaskInstance> sample_shots(const DatasetSpec& dataset, const TaskInstance& target,
                                       std::uint64_t seed) {
  std::vector<std::size_t> pool;
  pool.reserve(dataset.examples.size());
  for (std::size_t i = 0; i < dataset.examples.size(); ++i)
    if (dataset.examples[i].id != target.id) pool.push_back(i);
  const std::size_t k = static_cast<std::size_t>(dataset.shots);
  if (pool.size() < k)
    throw ValidationError("dataset '" + dataset.name + "': cannot sample " + std::to_string(k) +
                          " shots from " + std::to_string(pool.size()) +
                          " candidates (target excluded)");
  std::mt19937_64 rng(shot_seed(seed, dataset.name, target.id));
  std::vector<TaskInstance> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(dataset.examples[pool[i]]);
  }
  return out;
}

RenderedPrompt render(const TemplateSpec& tmpl, const std::vector<TaskInstance>& shots,
                      const TaskInstance& target) {
  std::size_t m0 = tmpl.body.find("|||");
  if (m0 != std::string::npos && tmpl.body.find("|||", m0 + 3) != std::string::npos)
    throw ValidationError("template '" + tmpl.name + "' contains more than one '|||' marker");
  BodyParts parts = split_loop(tmpl.body);
  if (!parts.has_loop && !shots.empty())
    throw ValidationError("template '" + tmpl.name + "' has no {#shots} block but " +
                          std::to_string(shots.size()) + " shots were sampled");
  if (parts.block.find("|||") != std::string::npos)
    throw ValidationError("template '" + tmpl.name +
                          "': the '|||' marker cannot sit inside the shot loop");

  auto run = [&](bool blank, RenderState& st) {
    st.blank_answers = blank;
    std::string out;
    render_text(parts.before, target, Scope::Target, st, out);
    for (const auto& s : shots) {
      RenderState shot_state;
      shot_state.blank_answers = blank;
      render_text(parts.block, s, Scope::Shot, shot_state, out);
    }
    render_text(parts.after, target, Scope::Target, st, out);
    return out;
  };

  RenderState st;
  std::string full = run(false, st);
  std::size_t marker = full.find("|||");
  RenderedPrompt rp;
  rp.full_prompt = full;
  std::size_t slot = st.slot_seen ? st.slot_pos : std::string::npos;
  if (marker != std::string::npos) {
    rp.full_prompt.erase(marker, 3);
    if (st.slot_seen && slot > marker) slot -= 3;
  }
  if (st.slot_seen && slot != rp.full_prompt.size())
    throw ValidationError("template '" + tmpl.name +
                          "' has content after the target answer slot");

  if (marker != std::string::npos) {
    RenderState bst;
    std::string blanked = run(true, bst);
    std::size_t bm = blanked.find("|||");
    std::string pre = blanked.substr(0, bm);
    std::string post = blanked.substr(bm + 3);
    std::size_t nl = pre.rfind('\n');
    rp.calibration_prefix = (nl == std::string::npos ? pre : pre.substr(nl + 1)) + post;
  }

  if (tmpl.style == Style::MC) {
    rp.choice_continuations = target.choices;
  } else if (tmpl.style == Style::FMC) {
    for (std::size_t i = 0; i < target.choices.size(); ++i)
      rp.choice_continuations.push_back(letter_for(static_cast<int>(i)));
  }
  return rp;
}

McPrediction rank_choices(const std::vector<ChoiceScore>& scores, bool have_prefix,
                          LengthNorm norm) {
  if (scores.empty()) throw ValidationError("no choice scores to rank");
  for (const auto& s : scores)
    if (s.token_count < 1)
      throw ValidationError("choice '" + s.choice + "' was scored with no tokens");
  auto argmax = [&](auto key) {
    int best = 0;
    double best_v = key(scores[0]);
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
      double v = key(scores[static_cast<std::size_t>(i)]);
      if (v > best_v) {  // ties keep the lowest index
        best_v = v;
        best = i;
      }
    }
    return best;
  };
  McPrediction p;
  p.base = argmax([](const ChoiceScore& s) { return s.raw_logprob; });
  if (norm == LengthNorm::LogPerToken) {
    p.length = argmax([](const ChoiceScore& s) { return s.raw_logprob / s.token_count; });
  } else {
    p.length =
        argmax([](const ChoiceScore& s) { return s.raw_logprob - std::log(double(s.token_count)); });
  }
  p.prior =
      have_prefix ? argmax([](const ChoiceScore& s) { return s.raw_logprob - s.prefix_logprob; })
                  : -1;
  return p;
}

McResult eval_mc(const RenderedPrompt& rendered, Backend& backend, LengthNorm norm) {
  if (rendered.choice_continuations.empty())
    throw ValidationError("no choices to score for MC evaluation");
  const bool have_prefix = !rendered.calibration_prefix.empty();
  double prefix_lp = 0.0;
  if (have_prefix) prefix_lp = backend.score({"", rendered.calibration_prefix}).total();
  McResult res;
  for (const auto& cont : rendered.choice_continuations) {
    ScoringResponse r = backend.score({rendered.full_prompt, cont});
    res.scores.push_back({cont, r.total(), static_cast<int>(r.token_count), prefix_lp});
  }
  res.pred = rank_choices(res.scores, have_prefix, norm);
  return res;
}

int eval_fmc(const RenderedPrompt& rendered, Backend& backend) {
  const std::size_t n = rendered.choice_continuations.size();
  if (n == 0) throw ValidationError("no choices to score for FMC evaluation");
  if (n > 26)
    throw ValidationError("FMC supports at most 26 choices, got " + std::to_string(n));
  std::vector<ChoiceScore> scores;
  for (const auto& cont : rendered.choice_continuations) {
    ScoringResponse r = backend.score({rendered.full_prompt, cont});
    scores.push_back({cont, r.total(), static_cast<int>(r.token_count), 0.0});
  }
  return rank_choices(scores, false).base;
}

std::string extract_number_token(const std::string& text) {
  const std::size_t n = text.size();
  auto digit = [&](std::size_t p) {
    return p < n && std::isdigit(static_cast<unsigned char>(text[p])) != 0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    if (j < n && (text[j] == '+' || text[j] == '-')) ++j;
    if (j < n && text[j] == '$') ++j;
    if (j < n && text[j] == '.') ++j;
    if (!digit(j)) continue;
    std::size_t k = j;
    while (k < n && (digit(k) || text[k] == '$' || text[k] == ',' || text[k] == '.' ||
                     text[k] == '%'))
      ++k;
    std::string canon;
    for (std::size_t p = i; p < k; ++p)
      if (text[p] != '$' && text[p] != ',' && text[p] != '%') canon += text[p];
    while (!canon.empty() && canon.back() == '.') canon.pop_back();
    return canon;
  }
  return "";
}

std::string parse_generation(const std::string& text, const std::string& profile) {
  if (profile != "default" && profile != "finqa")
    throw ValidationError("unknown parser profile '" + profile + "'");
  std::string t = text;
  std::size_t b = 0;
  while (b < t.size() && is_space(t[b])) ++b;
  t = t.substr(b);
  std::size_t nl = t.find('\n');
  if (nl != std::string::npos) t = t.substr(0, nl);
  t = trim(t);
  if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') ||
                        (t.front() == '\'' && t.back() == '\'')))
    t = t.substr(1, t.size() - 2);
  if (profile == "finqa") {
    std::string num = extract_number_token(t);
    if (!num.empty()) return num;
  }
  return t;
}

std::string eval_g(const RenderedPrompt& rendered, Backend& backend, const std::string& profile,
                   int max_tokens) {
  if (max_tokens < 0) throw ValidationError("max_tokens must be non-negative");
  GenerationRequest req;
  req.prompt = rendered.full_prompt;
  req.max_tokens = static_cast<std::uint64_t>(max_tokens);
  req.stop_sequences = {"\n"};
  GenerationResult gen = backend.generate(req);
  return parse_generation(gen.text, profile);
}

}  // namespace pad
