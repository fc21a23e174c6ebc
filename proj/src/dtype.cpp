#include "pad/dtype.hpp"

#include <cmath>
#include <limits>

#include "pad/error.hpp"

namespace pad {

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::F16: return 2;
    case DType::BF16: return 2;
  }
  return 0;
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::F64: return "F64";
    case DType::F32: return "F32";
    case DType::F16: return "F16";
    case DType::BF16: return "BF16";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "F64") return DType::F64;
  if (name == "F32") return DType::F32;
  if (name == "F16") return DType::F16;
  if (name == "BF16") return DType::BF16;
  throw ValidationError("unsupported dtype \"" + name +
                        "\" (supported: F64, F32, F16, BF16)");
}

float f32_from_f16(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h >> 15) & 1u;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  const std::uint32_t mant = h & 0x3FFu;

  std::uint32_t out;
  if (exp == 0) {
    if (mant == 0) {
      out = sign << 31;  // +-0
    } else {
      // subnormal: renormalize
      std::uint32_t e = 127 - 15 + 1;
      std::uint32_t m = mant;
      while ((m & 0x400u) == 0) {
        m <<= 1;
        --e;
      }
      m &= 0x3FFu;
      out = (sign << 31) | (e << 23) | (m << 13);
    }
  } else if (exp == 0x1F) {
    out = (sign << 31) | 0x7F800000u | (mant << 13);  // inf / NaN
  } else {
    out = (sign << 31) | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return detail::f32_from_bits(out);
}

std::uint16_t f16_from_f32(float f) {
  const std::uint32_t bits = detail::f32_bits(f);
  const std::uint32_t sign = (bits >> 16) & 0x8000u;
  const std::uint32_t exp = (bits >> 23) & 0xFFu;
  std::uint32_t mant = bits & 0x7FFFFFu;

  if (exp == 0xFF) {
    // inf or NaN; keep NaNs quiet
    if (mant != 0) return static_cast<std::uint16_t>(sign | 0x7E00u);
    return static_cast<std::uint16_t>(sign | 0x7C00u);
  }

  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1F) {
    return static_cast<std::uint16_t>(sign | 0x7C00u);  // overflow -> inf
  }
  if (e <= 0) {
    if (e < -10) return static_cast<std::uint16_t>(sign);  // underflow -> 0
    // subnormal result: shift mantissa (with implicit bit) right, RNE
    mant |= 0x800000u;
    const int shift = 14 - e;  // 14..24
    const std::uint32_t q = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t half = 1u << (shift - 1);
    std::uint32_t r = q;
    if (rem > half || (rem == half && (q & 1u))) ++r;
    return static_cast<std::uint16_t>(sign | r);
  }
  // normal result: 23 -> 10 mantissa bits, RNE (carry may bump the exponent)
  const std::uint32_t q = mant >> 13;
  const std::uint32_t rem = mant & 0x1FFFu;
  std::uint32_t r = (static_cast<std::uint32_t>(e) << 10) | q;
  if (rem > 0x1000u || (rem == 0x1000u && (q & 1u))) ++r;
  if (r >= 0x7C00u) return static_cast<std::uint16_t>(sign | 0x7C00u);
  return static_cast<std::uint16_t>(sign | r);
}

std::uint16_t bf16_from_f32(float f) {
  std::uint32_t bits = detail::f32_bits(f);
  if ((bits & 0x7F800000u) == 0x7F800000u && (bits & 0x7FFFFFu) != 0) {
    return static_cast<std::uint16_t>((bits >> 16) | 0x0040u);  // quiet NaN
  }
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7FFFu + lsb;  // round to nearest even on bit 16
  return static_cast<std::uint16_t>(bits >> 16);
}

namespace {

// double -> float with round-to-odd: an inexact conversion lands on the
// bracketing float whose mantissa lsb is odd, so the following RNE narrowing
// to f16/bf16 never sees a manufactured tie.
float f32_round_to_odd(double d) {
  const float f = static_cast<float>(d);
  if (std::isnan(f) || std::isinf(f)) return f;
  if (static_cast<double>(f) == d) return f;
  if (detail::f32_bits(f) & 1u) return f;
  return std::nextafterf(f, d > static_cast<double>(f)
                                 ? std::numeric_limits<float>::infinity()
                                 : -std::numeric_limits<float>::infinity());
}

}  // namespace

std::uint16_t f16_from_f64(double d) { return f16_from_f32(f32_round_to_odd(d)); }

std::uint16_t bf16_from_f64(double d) { return bf16_from_f32(f32_round_to_odd(d)); }

double load_scalar(DType t, const unsigned char* p) {
  switch (t) {
    case DType::F64: {
      double v;
      std::memcpy(&v, p, 8);
      return v;
    }
    case DType::F32: {
      float v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case DType::F16: {
      std::uint16_t u;
      std::memcpy(&u, p, 2);
      return static_cast<double>(f32_from_f16(u));
    }
    case DType::BF16: {
      std::uint16_t u;
      std::memcpy(&u, p, 2);
      return static_cast<double>(f32_from_bf16(u));
    }
  }
  return 0.0;
}

void store_scalar(DType t, unsigned char* p, double value) {
  switch (t) {
    case DType::F64: {
      std::memcpy(p, &value, 8);
      return;
    }
    case DType::F32: {
      const float v = static_cast<float>(value);
      std::memcpy(p, &v, 4);
      return;
    }
    case DType::F16: {
      const std::uint16_t u = f16_from_f64(value);
      std::memcpy(p, &u, 2);
      return;
    }
    case DType::BF16: {
      const std::uint16_t u = bf16_from_f64(value);
      std::memcpy(p, &u, 2);
      return;
    }
  }
}

}  // namespace pad
