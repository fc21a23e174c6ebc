#include "pad/tiny_server.hpp"

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "pad/error.hpp"

namespace pad {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  json e;
  e["error"]["code"] = code;
  e["error"]["message"] = message;
  res.status = status;
  res.set_content(e.dump(), "application/json");
}

}  // namespace

namespace detail_server {

struct Impl {
  TinyLM model;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;

  explicit Impl(TinyLM m) : model(std::move(m)) {}

  void route() {
    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "bad_request", std::string("body is not JSON: ") + e.what());
      }
      if (!body.is_object() || !body.contains("prompt") || !body.contains("continuation") ||
          !body["prompt"].is_string() || !body["continuation"].is_string()) {
        return send_error(res, 400, "bad_request", "need string fields prompt, continuation");
      }
      try {
        ScoringRequest sr;
        sr.prompt = body["prompt"].get<std::string>();
        sr.continuation = body["continuation"].get<std::string>();
        const ScoringResponse out = model.score(sr);
        json j;
        j["token_logprobs"] = out.token_logprobs;
        j["token_count"] = out.token_count;
        res.set_content(j.dump(), "application/json");
      } catch (const ValidationError& e) {
        send_error(res, 400, "validation", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    });

    server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "bad_request", std::string("body is not JSON: ") + e.what());
      }
      if (!body.is_object() || !body.contains("prompt") || !body["prompt"].is_string()) {
        return send_error(res, 400, "bad_request", "need string field prompt");
      }
      try {
        GenerationRequest gr;
        gr.prompt = body["prompt"].get<std::string>();
        gr.max_tokens = body.value("max_tokens", std::uint64_t{0});
        if (body.contains("stop")) {
          for (const auto& s : body["stop"]) {
            gr.stop_sequences.push_back(s.get<std::string>());
          }
        }
        const GenerationResult out = model.generate(gr);
        json j;
        j["text"] = out.text;
        j["truncated"] = out.truncated;
        res.set_content(j.dump(), "application/json");
      } catch (const ValidationError& e) {
        send_error(res, 400, "validation", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    });
  }
};

}  // namespace detail_server

TinyServer::TinyServer(TinyLM model, const std::string& host, int port)
    : impl_(std::make_unique<detail_server::Impl>(std::move(model))) {
  impl_->host = host;
  impl_->route();
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
    if (impl_->port <= 0) {
      throw IoError("cannot bind a port on " + host);
    }
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

TinyServer::~TinyServer() {
  stop();
}

int TinyServer::port() const { return impl_->port; }

std::string TinyServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

void TinyServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void TinyServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace pad
