#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pad/dtype.hpp"

namespace pad {

// A named, typed, shaped weight array. Data is raw little-endian storage,
// row-major; an empty shape denotes a scalar (one element).
struct Tensor {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<unsigned char> data;

  std::uint64_t num_elements() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::uint64_t num_bytes() const { return num_elements() * dtype_size(dtype); }

  // Throws ValidationError if data length disagrees with shape x dtype.
  void validate() const;

  double get(std::uint64_t i) const {
    return load_scalar(dtype, data.data() + i * dtype_size(dtype));
  }

  void set(std::uint64_t i, double v) {
    store_scalar(dtype, data.data() + i * dtype_size(dtype), v);
  }

  static Tensor make(std::string name, DType dtype,
                     std::vector<std::uint64_t> shape);
};

}  // namespace pad
