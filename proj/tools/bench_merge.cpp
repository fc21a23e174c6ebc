// Micro-benchmark: serial reference loop vs the OpenMP kernel on the same
// buffers, verifying bitwise agreement while timing both.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pad/dtype.hpp"
#include "pad/merge_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace pad;

namespace {

std::vector<unsigned char> random_buffer(DType dtype, std::uint64_t n, std::uint64_t seed) {
  std::vector<unsigned char> buf(n * dtype_size(dtype));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (std::uint64_t i = 0; i < n; ++i) {
    store_scalar(dtype, buf.data() + i * dtype_size(dtype), dist(rng));
  }
  return buf;
}

template <typename F>
double best_seconds(int repeat, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"merge kernel benchmark: serial reference vs OpenMP"};
  std::uint64_t elements = 1u << 24;
  int repeat = 5;
  double lambda = 0.375;
  app.add_option("--elements", elements, "elements per buffer");
  app.add_option("--repeat", repeat, "timed repetitions; best run is reported");
  app.add_option("--lambda", lambda, "blend strength");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("%-5s %12s %12s %12s %8s %s\n", "dtype", "elements", "serial", "parallel",
              "speedup", "bitwise");

  for (DType dt : {DType::F64, DType::F32, DType::F16, DType::BF16}) {
    const auto a = random_buffer(dt, elements, 1);
    const auto b = random_buffer(dt, elements, 2);
    std::vector<unsigned char> out_s(a.size()), out_p(a.size());

    const double ts = best_seconds(repeat, [&] {
      kernels::lerp_serial(dt, a.data(), b.data(), out_s.data(), elements, lambda);
    });
    const double tp = best_seconds(repeat, [&] {
      kernels::lerp_parallel(dt, a.data(), b.data(), out_p.data(), elements, lambda);
    });
    const bool same = std::memcmp(out_s.data(), out_p.data(), out_s.size()) == 0;
    std::printf("%-5s %12llu %10.1fms %10.1fms %7.2fx %s\n", dtype_name(dt),
                static_cast<unsigned long long>(elements), ts * 1e3, tp * 1e3, ts / tp,
                same ? "ok" : "MISMATCH");
    if (!same) return 1;
  }
  return 0;
}
