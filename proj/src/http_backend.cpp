#include "pad/http_backend.hpp"

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "pad/error.hpp"

namespace pad {

using nlohmann::json;

namespace {

// Pull the server's {"error":{"code","message"}} shape out of a failure body;
// fall back to the raw status when the body is not in that shape.
[[noreturn]] void throw_server_error(int status, const std::string& body) {
  try {
    const json j = json::parse(body);
    if (j.contains("error") && j["error"].is_object()) {
      const json& e = j["error"];
      throw BackendError(e.value("code", "unknown"),
                         e.value("message", "server error"));
    }
  } catch (const json::exception&) {
    // not the structured shape; fall through
  }
  throw BackendError("http_" + std::to_string(status),
                     "server returned status " + std::to_string(status));
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, int max_in_flight)
    : base_url_(std::move(base_url)),
      slots_(max_in_flight > 0 ? max_in_flight : 1) {
  if (base_url_.rfind("http://", 0) != 0 && base_url_.rfind("https://", 0) != 0) {
    throw ValidationError("backend URL must start with http:// or https://, got " + base_url_);
  }
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<256>& s;
    ~Release() { s.release(); }
  } release{slots_};

  // one client per request keeps this trivially thread-safe
  httplib::Client client(base_url_);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(300, 0);
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    throw BackendError("transport", "cannot reach backend at " + base_url_ + ": " +
                                        httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw_server_error(res->status, res->body);
  }
  return res->body;
}

ScoringResponse HttpBackend::score(const ScoringRequest& req) {
  json body;
  body["prompt"] = req.prompt;
  body["continuation"] = req.continuation;
  const std::string raw = post_json("/v1/score", body.dump());

  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception& e) {
    throw BackendError("protocol", std::string("malformed score response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("token_logprobs") || !j.contains("token_count") ||
      !j["token_logprobs"].is_array()) {
    throw BackendError("protocol", "score response missing token_logprobs/token_count");
  }
  ScoringResponse resp;
  for (const auto& v : j["token_logprobs"]) {
    if (!v.is_number()) {
      throw BackendError("protocol", "token_logprobs entries must be numbers");
    }
    const double lp = v.get<double>();
    if (lp > 1e-9) {
      throw BackendError("protocol", "log probability " + std::to_string(lp) + " is positive");
    }
    resp.token_logprobs.push_back(lp);
  }
  resp.token_count = j["token_count"].get<std::uint64_t>();
  if (resp.token_count != resp.token_logprobs.size()) {
    throw BackendError("protocol", "token_count disagrees with token_logprobs length");
  }
  return resp;
}

GenerationResult HttpBackend::generate(const GenerationRequest& req) {
  json body;
  body["prompt"] = req.prompt;
  body["max_tokens"] = req.max_tokens;
  body["stop"] = req.stop_sequences;
  const std::string raw = post_json("/v1/generate", body.dump());

  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception& e) {
    throw BackendError("protocol", std::string("malformed generate response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text")) {
    throw BackendError("protocol", "generate response missing text");
  }
  GenerationResult out;
  out.text = j["text"].get<std::string>();
  out.truncated = j.value("truncated", false);
  return out;
}

}  // namespace pad
