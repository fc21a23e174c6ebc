#include "pad/backend.hpp"

#include "pad/error.hpp"
#include "pad/http_backend.hpp"
#include "pad/tiny_lm.hpp"

namespace pad {

std::unique_ptr<Backend> make_backend(const std::string& descriptor) {
  if (descriptor.rfind("tiny:", 0) == 0) {
    return std::make_unique<TinyLM>(TinyLM::load(descriptor.substr(5)));
  }
  if (descriptor.rfind("http://", 0) == 0 || descriptor.rfind("https://", 0) == 0) {
    return std::make_unique<HttpBackend>(descriptor);
  }
  throw ValidationError("backend descriptor must be tiny:<path> or an http(s) URL, got \"" +
                        descriptor + "\"");
}

}  // namespace pad
