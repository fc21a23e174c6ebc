#pragma once

#include <stdexcept>
#include <string>

namespace pad {

// Validation failures (bad arguments, malformed inputs, contract violations).
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / OS-level failures. CLI exit code 1.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Remote backend failures (transport errors, server-reported errors).
// CLI exit code 3 when an eval run is cut short.
class BackendError : public std::runtime_error {
 public:
  BackendError(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace pad
