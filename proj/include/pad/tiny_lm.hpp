#pragma once

#include <array>
#include <string>
#include <vector>

#include "pad/backend.hpp"

namespace pad {

// Deterministic byte-level language model small enough to run merges through
// end to end. Weights come from a checkpoint holding "tiny.embed" [V x d] and
// "tiny.proj" [d x V]; the vocabulary string and context window live in the
// header metadata under "tiny.vocab" / "tiny.window".
//
// Forward pass: embed each byte token, average the embeddings of the last
// `window` context tokens (zero vector for empty context), project to vocab
// logits, log-softmax. All arithmetic is double precision; the model is
// immutable after load and safe to share across threads.
class TinyLM : public Backend {
 public:
  static TinyLM load(const std::string& checkpoint_path);

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResult generate(const GenerationRequest& req) override;

  std::size_t vocab_size() const { return vocab_.size(); }
  const std::string& vocab() const { return vocab_; }
  int window() const { return window_; }

  // Byte tokenization; throws ValidationError on a byte outside the vocab.
  std::vector<int> tokenize(const std::string& text) const;

  // Log-softmax next-token distribution after the given context.
  std::vector<double> next_token_logprobs(const std::vector<int>& context) const;

 private:
  TinyLM() = default;

  std::string vocab_;
  int window_ = 1;
  std::size_t dim_ = 0;
  std::vector<double> embed_;  // V x d, row-major
  std::vector<double> proj_;   // d x V, row-major
  std::array<int, 256> byte_to_id_{};
};

}  // namespace pad
