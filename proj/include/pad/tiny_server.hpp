#pragma once

#include <memory>
#include <string>
#include <thread>

#include "pad/tiny_lm.hpp"

namespace pad {

namespace detail_server {
struct Impl;
}

// Serves a TinyLM over the JSON wire protocol. Used by the CLI's serve verb
// and by tests that need a live endpoint for the HTTP client.
class TinyServer {
 public:
  // port 0 picks a free port; port() reports the bound one.
  TinyServer(TinyLM model, const std::string& host, int port);
  ~TinyServer();
  TinyServer(const TinyServer&) = delete;
  TinyServer& operator=(const TinyServer&) = delete;

  int port() const;
  std::string url() const;

  // Blocks until stop() is called from another thread (CLI use).
  void wait();
  void stop();

 private:
  std::unique_ptr<detail_server::Impl> impl_;
};

}  // namespace pad
