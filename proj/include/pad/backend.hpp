#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pad {

struct ScoringRequest {
  std::string prompt;        // may be empty
  std::string continuation;  // the text whose likelihood is wanted
};

struct ScoringResponse {
  // Natural-log probability of each continuation token given everything
  // before it; sums to log P(continuation | prompt).
  std::vector<double> token_logprobs;
  std::uint64_t token_count = 0;  // == token_logprobs.size()

  double total() const {
    double s = 0.0;
    for (double v : token_logprobs) s += v;
    return s;
  }
};

struct GenerationRequest {
  std::string prompt;
  std::uint64_t max_tokens = 0;
  std::vector<std::string> stop_sequences;
  // decoding is always greedy (temperature 0); no knob on purpose
};

struct GenerationResult {
  std::string text;
  bool truncated = false;  // budget ran out before any stop sequence
};

// Uniform scoring/generation surface. Implementations must be safe for
// concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ScoringResponse score(const ScoringRequest& req) = 0;
  virtual GenerationResult generate(const GenerationRequest& req) = 0;
};

// "tiny:<checkpoint path>" loads the built-in model; "http://..." or
// "https://..." talks to a remote server. Anything else is rejected.
std::unique_ptr<Backend> make_backend(const std::string& descriptor);

}  // namespace pad
