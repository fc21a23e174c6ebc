#include "pad/tensor.hpp"

#include "pad/error.hpp"

namespace pad {

void Tensor::validate() const {
  if (data.size() != num_bytes()) {
    throw ValidationError("tensor \"" + name + "\": data is " +
                          std::to_string(data.size()) + " bytes, shape needs " +
                          std::to_string(num_bytes()));
  }
}

Tensor Tensor::make(std::string name, DType dtype,
                    std::vector<std::uint64_t> shape) {
  Tensor t;
  t.name = std::move(name);
  t.dtype = dtype;
  t.shape = std::move(shape);
  t.data.resize(t.num_bytes());
  return t;
}

}  // namespace pad
