#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace pad {

// Element types supported by the checkpoint container. Integer dtypes are
// rejected at parse time so interpolation stays well-defined.
enum class DType { F64, F32, F16, BF16 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

// Maps the container's dtype string ("F32", "BF16", ...). Throws
// ValidationError for anything outside the supported set.
DType dtype_from_name(const std::string& name);

namespace detail {

inline std::uint32_t f32_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof(u));
  return u;
}

inline float f32_from_bits(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

}  // namespace detail

// IEEE binary16 <-> float, round-to-nearest-even on the narrowing side.
float f32_from_f16(std::uint16_t h);
std::uint16_t f16_from_f32(float f);

// bfloat16 <-> float. Narrowing rounds to nearest even; NaNs are quieted so
// rounding can never turn a NaN into an infinity.
inline float f32_from_bf16(std::uint16_t b) {
  return detail::f32_from_bits(static_cast<std::uint32_t>(b) << 16);
}
std::uint16_t bf16_from_f32(float f);

// Narrowing from double goes through a round-to-odd float intermediate, which
// keeps the final round-to-nearest-even step correctly rounded (no double
// rounding).
std::uint16_t f16_from_f64(double d);
std::uint16_t bf16_from_f64(double d);

// Scalar accessors over raw little-endian storage of the given dtype.
double load_scalar(DType t, const unsigned char* p);
void store_scalar(DType t, unsigned char* p, double value);

}  // namespace pad
