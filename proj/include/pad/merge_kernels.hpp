#pragma once

#include <cstdint>

#include "pad/dtype.hpp"

namespace pad::kernels {

// out[i] = (1 - lambda) * a[i] + lambda * b[i], accumulated in double and
// stored back to the element dtype with round-to-nearest-even.
//
// The serial form is the reference implementation: one generic loop over
// load_scalar/store_scalar, kept deliberately simple so it can stand in as
// ground truth for the parallel form in tests and benchmarks. Both forms
// evaluate the identical expression in the identical order, so their outputs
// are required to be bitwise equal.
void lerp_serial(DType dtype, const unsigned char* a, const unsigned char* b,
                 unsigned char* out, std::uint64_t n, double lambda);

// OpenMP-parallel form with per-dtype inner loops. Falls back to a plain loop
// when built without OpenMP.
void lerp_parallel(DType dtype, const unsigned char* a, const unsigned char* b,
                   unsigned char* out, std::uint64_t n, double lambda);

}  // namespace pad::kernels
