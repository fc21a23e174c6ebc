#include "pad/tiny_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pad/checkpoint.hpp"
#include "pad/error.hpp"

namespace pad {

TinyLM TinyLM::load(const std::string& checkpoint_path) {
  CheckpointReader reader(checkpoint_path);
  const CheckpointManifest& m = reader.manifest();

  for (const char* name : {"tiny.embed", "tiny.proj"}) {
    if (!m.contains(name)) {
      throw ValidationError(std::string("checkpoint ") + checkpoint_path +
                            " has no \"" + name + "\" tensor; not a tiny model");
    }
  }
  const auto meta_value = [&](const char* key) -> std::string {
    auto it = m.metadata.find(key);
    if (it == m.metadata.end()) {
      throw ValidationError(std::string("checkpoint ") + checkpoint_path +
                            " is missing the \"" + key + "\" metadata entry");
    }
    return it->second;
  };

  TinyLM lm;
  lm.vocab_ = meta_value("tiny.vocab");
  if (lm.vocab_.empty()) {
    throw ValidationError("tiny.vocab is empty in " + checkpoint_path);
  }
  {
    const std::string w = meta_value("tiny.window");
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (!end || *end != '\0' || v < 1) {
      throw ValidationError("tiny.window must be a positive integer, got \"" + w + "\"");
    }
    lm.window_ = static_cast<int>(v);
  }

  const Tensor embed = reader.read_tensor("tiny.embed");
  const Tensor proj = reader.read_tensor("tiny.proj");
  if (embed.shape.size() != 2 || proj.shape.size() != 2) {
    throw ValidationError("tiny.embed and tiny.proj must be 2-D in " + checkpoint_path);
  }
  const std::uint64_t V = embed.shape[0];
  const std::uint64_t d = embed.shape[1];
  if (proj.shape[0] != d || proj.shape[1] != V) {
    throw ValidationError("tiny.proj shape [" + std::to_string(proj.shape[0]) + ", " +
                          std::to_string(proj.shape[1]) + "] does not transpose tiny.embed [" +
                          std::to_string(V) + ", " + std::to_string(d) + "]");
  }
  if (V != lm.vocab_.size()) {
    throw ValidationError("tiny.embed has " + std::to_string(V) + " rows but tiny.vocab has " +
                          std::to_string(lm.vocab_.size()) + " tokens");
  }

  lm.dim_ = d;
  lm.embed_.resize(V * d);
  lm.proj_.resize(d * V);
  for (std::uint64_t i = 0; i < V * d; ++i) lm.embed_[i] = embed.get(i);
  for (std::uint64_t i = 0; i < d * V; ++i) lm.proj_[i] = proj.get(i);

  lm.byte_to_id_.fill(-1);
  for (std::size_t i = 0; i < lm.vocab_.size(); ++i) {
    const unsigned char b = static_cast<unsigned char>(lm.vocab_[i]);
    if (lm.byte_to_id_[b] != -1) {
      throw ValidationError("tiny.vocab repeats byte value " + std::to_string(b));
    }
    lm.byte_to_id_[b] = static_cast<int>(i);
  }
  return lm;
}

std::vector<int> TinyLM::tokenize(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) {
    const int id = byte_to_id_[static_cast<unsigned char>(c)];
    if (id < 0) {
      throw ValidationError("byte value " + std::to_string(static_cast<unsigned char>(c)) +
                            " is outside the model vocabulary");
    }
    ids.push_back(id);
  }
  return ids;
}

std::vector<double> TinyLM::next_token_logprobs(const std::vector<int>& context) const {
  const std::size_t V = vocab_.size();

  // mean embedding of the last `window_` tokens; empty context pools to zero
  std::vector<double> pooled(dim_, 0.0);
  const std::size_t take = std::min<std::size_t>(context.size(), static_cast<std::size_t>(window_));
  if (take > 0) {
    for (std::size_t j = context.size() - take; j < context.size(); ++j) {
      const double* row = embed_.data() + static_cast<std::size_t>(context[j]) * dim_;
      for (std::size_t r = 0; r < dim_; ++r) pooled[r] += row[r];
    }
    for (std::size_t r = 0; r < dim_; ++r) pooled[r] /= static_cast<double>(take);
  }

  std::vector<double> logits(V, 0.0);
  for (std::size_t r = 0; r < dim_; ++r) {
    const double p = pooled[r];
    const double* row = proj_.data() + r * V;
    for (std::size_t v = 0; v < V; ++v) logits[v] += p * row[v];
  }

  // stable log-softmax
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (double& l : logits) l -= lse;
  return logits;
}

ScoringResponse TinyLM::score(const ScoringRequest& req) {
  std::vector<int> context = tokenize(req.prompt);
  const std::vector<int> cont = tokenize(req.continuation);

  ScoringResponse resp;
  resp.token_logprobs.reserve(cont.size());
  for (int tok : cont) {
    const std::vector<double> lp = next_token_logprobs(context);
    resp.token_logprobs.push_back(lp[static_cast<std::size_t>(tok)]);
    context.push_back(tok);
  }
  resp.token_count = resp.token_logprobs.size();
  return resp;
}

GenerationResult TinyLM::generate(const GenerationRequest& req) {
  std::vector<int> context = tokenize(req.prompt);

  GenerationResult out;
  out.truncated = true;
  for (std::uint64_t step = 0; step < req.max_tokens; ++step) {
    const std::vector<double> lp = next_token_logprobs(context);
    // greedy; ties break toward the lowest token id so decoding is stable
    std::size_t best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v) {
      if (lp[v] > lp[best]) best = v;
    }
    context.push_back(static_cast<int>(best));
    out.text.push_back(vocab_[best]);

    for (const std::string& stop : req.stop_sequences) {
      if (stop.empty()) continue;
      const std::size_t pos = out.text.find(stop);
      if (pos != std::string::npos) {
        out.text.resize(pos);  // stop sequence is excluded
        out.truncated = false;
        return out;
      }
    }
  }
  return out;
}

}  // namespace pad
