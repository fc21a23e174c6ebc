#include "pad/merge_kernels.hpp"

#include <cstring>

namespace pad::kernels {

void lerp_serial(DType dtype, const unsigned char* a, const unsigned char* b,
                 unsigned char* out, std::uint64_t n, double lambda) {
  const std::size_t sz = dtype_size(dtype);
  const double w0 = 1.0 - lambda;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double av = load_scalar(dtype, a + i * sz);
    const double bv = load_scalar(dtype, b + i * sz);
    store_scalar(dtype, out + i * sz, w0 * av + lambda * bv);
  }
}

namespace {

// Typed loops so the parallel path is not throttled by a per-element dtype
// switch. Each body must stay expression-for-expression identical to
// lerp_serial; the bitwise-equality contract in the header depends on it.

void lerp_f64(const unsigned char* a, const unsigned char* b, unsigned char* out,
              std::uint64_t n, double lambda) {
  const double w0 = 1.0 - lambda;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    double av, bv;
    std::memcpy(&av, a + i * 8, 8);
    std::memcpy(&bv, b + i * 8, 8);
    const double r = w0 * av + lambda * bv;
    std::memcpy(out + i * 8, &r, 8);
  }
}

void lerp_f32(const unsigned char* a, const unsigned char* b, unsigned char* out,
              std::uint64_t n, double lambda) {
  const double w0 = 1.0 - lambda;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    float av, bv;
    std::memcpy(&av, a + i * 4, 4);
    std::memcpy(&bv, b + i * 4, 4);
    const float r = static_cast<float>(w0 * static_cast<double>(av) +
                                       lambda * static_cast<double>(bv));
    std::memcpy(out + i * 4, &r, 4);
  }
}

void lerp_f16(const unsigned char* a, const unsigned char* b, unsigned char* out,
              std::uint64_t n, double lambda) {
  const double w0 = 1.0 - lambda;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    std::uint16_t ab, bb;
    std::memcpy(&ab, a + i * 2, 2);
    std::memcpy(&bb, b + i * 2, 2);
    const double av = static_cast<double>(f32_from_f16(ab));
    const double bv = static_cast<double>(f32_from_f16(bb));
    const std::uint16_t r = f16_from_f64(w0 * av + lambda * bv);
    std::memcpy(out + i * 2, &r, 2);
  }
}

void lerp_bf16(const unsigned char* a, const unsigned char* b, unsigned char* out,
               std::uint64_t n, double lambda) {
  const double w0 = 1.0 - lambda;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    std::uint16_t ab, bb;
    std::memcpy(&ab, a + i * 2, 2);
    std::memcpy(&bb, b + i * 2, 2);
    const double av = static_cast<double>(f32_from_bf16(ab));
    const double bv = static_cast<double>(f32_from_bf16(bb));
    const std::uint16_t r = bf16_from_f64(w0 * av + lambda * bv);
    std::memcpy(out + i * 2, &r, 2);
  }
}

}  // namespace

void lerp_parallel(DType dtype, const unsigned char* a, const unsigned char* b,
                   unsigned char* out, std::uint64_t n, double lambda) {
  switch (dtype) {
    case DType::F64: lerp_f64(a, b, out, n, lambda); return;
    case DType::F32: lerp_f32(a, b, out, n, lambda); return;
    case DType::F16: lerp_f16(a, b, out, n, lambda); return;
    case DType::BF16: lerp_bf16(a, b, out, n, lambda); return;
  }
}

}  // namespace pad::kernels
