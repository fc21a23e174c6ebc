#pragma once

#include <semaphore>
#include <string>

#include "pad/backend.hpp"

namespace pad {

// Client for the JSON-over-HTTP scoring protocol:
//   POST /v1/score    {"prompt","continuation"} -> {"token_logprobs","token_count"}
//   POST /v1/generate {"prompt","max_tokens","stop"} -> {"text","truncated"}
// Server-side failures arrive as {"error":{"code","message"}} with a 4xx/5xx
// status and are rethrown as BackendError with the server's code.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string base_url, int max_in_flight = 4);

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResult generate(const GenerationRequest& req) override;

 private:
  std::string post_json(const std::string& path, const std::string& body);

  std::string base_url_;
  std::counting_semaphore<256> slots_;
};

}  // namespace pad
