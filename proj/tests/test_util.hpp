#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "pad/tensor.hpp"

namespace testutil {

// Self-cleaning scratch directory for tests that touch the filesystem.
class TempDir {
 public:
  TempDir() {
    std::string tpl = (std::filesystem::temp_directory_path() / "padtest_XXXXXX").string();
    if (!mkdtemp(tpl.data())) {
      std::abort();
    }
    path_ = tpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline pad::Tensor random_tensor(const std::string& name, pad::DType dtype,
                                 std::vector<std::uint64_t> shape, std::uint64_t seed,
                                 double lo = -4.0, double hi = 4.0) {
  pad::Tensor t = pad::Tensor::make(name, dtype, std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::uint64_t i = 0; i < t.num_elements(); ++i) t.set(i, dist(rng));
  return t;
}

}  // namespace testutil
