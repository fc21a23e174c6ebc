#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "pad/checkpoint.hpp"
#include "pad/error.hpp"
#include "pad/merge.hpp"
#include "pad/merge_kernels.hpp"
#include "test_util.hpp"

using namespace pad;
using testutil::TempDir;

namespace {

// Independent scalar route: evaluate the blend formula directly, one element
// at a time, without touching the kernel code.
double blend_ref(double a, double b, double lambda) {
  return (1.0 - lambda) * a + lambda * b;
}

std::int64_t f32_ord(std::uint32_t b) {
  return (b & 0x80000000u) ? -static_cast<std::int64_t>(b & 0x7FFFFFFFu)
                           : static_cast<std::int64_t>(b);
}

std::int64_t ord16(std::uint16_t b) {
  return (b & 0x8000u) ? -static_cast<std::int64_t>(b & 0x7FFFu)
                       : static_cast<std::int64_t>(b);
}

// ulp distance between two stored elements of the same dtype
std::int64_t ulp_distance(DType t, const unsigned char* a, const unsigned char* b) {
  if (t == DType::F32) {
    std::uint32_t ua, ub;
    std::memcpy(&ua, a, 4);
    std::memcpy(&ub, b, 4);
    return std::llabs(f32_ord(ua) - f32_ord(ub));
  }
  std::uint16_t ua, ub;
  std::memcpy(&ua, a, 2);
  std::memcpy(&ub, b, 2);
  return std::llabs(ord16(ua) - ord16(ub));
}

Tensor f32_bits_tensor(const std::string& name, std::initializer_list<std::uint32_t> bits) {
  Tensor t = Tensor::make(name, DType::F32, {bits.size()});
  std::size_t i = 0;
  for (std::uint32_t b : bits) {
    std::memcpy(t.data.data() + 4 * i, &b, 4);
    ++i;
  }
  return t;
}

}  // namespace

TEST_CASE("quarter blend of 2 and 4 is 2.5") {
  for (DType dt : {DType::F64, DType::F32, DType::F16, DType::BF16}) {
    Tensor b = Tensor::make("w", dt, {1});
    Tensor i = Tensor::make("w", dt, {1});
    b.set(0, 2.0);
    i.set(0, 4.0);
    const Tensor out = interpolate_tensor(b, i, Rational(1, 4));
    CAPTURE(dtype_name(dt));
    CHECK(out.get(0) == 2.5);
    CHECK(out.dtype == dt);
    CHECK(out.shape == b.shape);
  }
}

TEST_CASE("endpoints reproduce input bytes even for -0.0, NaN payloads and inf") {
  const Tensor b = f32_bits_tensor("w", {0x80000000u,   // -0.0
                                         0x7FC00123u,   // NaN with payload
                                         0x7F800001u,   // signaling NaN
                                         0x7F800000u,   // +inf
                                         0x3F800000u});
  const Tensor i = f32_bits_tensor("w", {0x3F800000u, 0xFF800000u, 0x00000001u,
                                         0x80000000u, 0x7FC00000u});
  CHECK(interpolate_tensor(b, i, Rational(0, 1)).data == b.data);
  CHECK(interpolate_tensor(b, i, Rational(1, 1)).data == i.data);
}

TEST_CASE("three-eighths blend matches the scalar reference exactly") {
  const Tensor b = testutil::random_tensor("w", DType::F32, {257, 13}, 101);
  const Tensor i = testutil::random_tensor("w", DType::F32, {257, 13}, 202);
  const Tensor out = interpolate_tensor(b, i, Rational(3, 8));
  for (std::uint64_t k = 0; k < out.num_elements(); ++k) {
    const float want = static_cast<float>(blend_ref(b.get(k), i.get(k), 0.375));
    float got;
    std::memcpy(&got, out.data.data() + 4 * k, 4);
    CAPTURE(k);
    REQUIRE(detail::f32_bits(got) == detail::f32_bits(want));
  }
}

TEST_CASE("serial and parallel kernels agree bitwise on every dtype") {
  for (DType dt : {DType::F64, DType::F32, DType::F16, DType::BF16}) {
    const std::uint64_t n = 10007;  // odd length to exercise loop remainders
    const Tensor a = testutil::random_tensor("a", dt, {n}, 7, -100.0, 100.0);
    const Tensor b = testutil::random_tensor("b", dt, {n}, 8, -100.0, 100.0);
    for (double lam : {0.0, 0.125, 0.375, 0.5, 0.625, 1.0, 0.3333333333333333}) {
      std::vector<unsigned char> s(a.data.size()), p(a.data.size());
      kernels::lerp_serial(dt, a.data.data(), b.data.data(), s.data(), n, lam);
      kernels::lerp_parallel(dt, a.data.data(), b.data.data(), p.data(), n, lam);
      CAPTURE(dtype_name(dt));
      CAPTURE(lam);
      REQUIRE(s == p);
    }
  }
}

TEST_CASE("swapping the endpoints and mirroring lambda gives the same blend") {
  for (DType dt : {DType::F32, DType::F16, DType::BF16}) {
    const Tensor a = testutil::random_tensor("a", dt, {4096}, 31);
    const Tensor b = testutil::random_tensor("b", dt, {4096}, 32);
    for (const Rational& lam : lambda_grid()) {
      const Rational mirror = Rational(1, 1) - lam;
      const Tensor x = interpolate_tensor(a, b, lam);
      const Tensor y = interpolate_tensor(b, a, mirror);
      CAPTURE(dtype_name(dt));
      CAPTURE(lam.to_string());
      // grid weights are exact binary fractions, so both orders evaluate the
      // same products and the commuted sum: bitwise equal
      REQUIRE(x.data == y.data);
    }
    // off-grid lambdas may differ by one rounding of (1 - lambda)
    const Rational lam(3, 10);
    const Tensor x = interpolate_tensor(a, b, lam);
    const Tensor y = interpolate_tensor(b, a, Rational(1, 1) - lam);
    const std::size_t sz = dtype_size(dt);
    for (std::uint64_t k = 0; k < x.num_elements(); ++k) {
      REQUIRE(ulp_distance(dt, x.data.data() + k * sz, y.data.data() + k * sz) <= 1);
    }
  }
}

TEST_CASE("blend stays inside the endpoint interval") {
  for (DType dt : {DType::F32, DType::F16, DType::BF16}) {
    Tensor a = testutil::random_tensor("a", dt, {2048}, 41);
    Tensor b = testutil::random_tensor("b", dt, {2048}, 42);
    for (std::uint64_t k = 0; k < a.num_elements(); ++k) {
      // order each pair so a <= b
      if (a.get(k) > b.get(k)) {
        const double t = a.get(k);
        a.set(k, b.get(k));
        b.set(k, t);
      }
    }
    for (const Rational& lam : lambda_grid()) {
      const Tensor out = interpolate_tensor(a, b, lam);
      for (std::uint64_t k = 0; k < out.num_elements(); ++k) {
        CAPTURE(dtype_name(dt));
        CAPTURE(lam.to_string());
        CAPTURE(k);
        REQUIRE(out.get(k) >= a.get(k));
        REQUIRE(out.get(k) <= b.get(k));
      }
    }
  }
}

TEST_CASE("interpolation rejects mismatched inputs") {
  const Tensor a = testutil::random_tensor("a", DType::F32, {4}, 1);
  const Tensor b16 = testutil::random_tensor("a", DType::BF16, {4}, 2);
  const Tensor b5 = testutil::random_tensor("a", DType::F32, {5}, 3);
  CHECK_THROWS_WITH_AS(interpolate_tensor(a, b16, Rational(1, 2)),
                       doctest::Contains("dtype"), ValidationError);
  CHECK_THROWS_WITH_AS(interpolate_tensor(a, b5, Rational(1, 2)),
                       doctest::Contains("shape"), ValidationError);
  CHECK_THROWS_AS(interpolate_tensor(a, b5, Rational(9, 8)), ValidationError);
  CHECK_THROWS_AS(interpolate_tensor(a, b5, Rational(-1, 8)), ValidationError);
}

TEST_CASE("merging a checkpoint with itself is a fixed point at every lambda") {
  TempDir tmp;
  std::vector<Tensor> ts;
  ts.push_back(testutil::random_tensor("w.f32", DType::F32, {9, 5}, 51));
  ts.push_back(testutil::random_tensor("w.f16", DType::F16, {33}, 52));
  ts.push_back(testutil::random_tensor("w.bf16", DType::BF16, {17}, 53));
  const std::string src = tmp.file("self.safetensors");
  write_checkpoint(ts, src);

  for (const Rational& lam : lambda_grid()) {
    MergeSpec spec;
    spec.lambda = lam;
    spec.base_path = src;
    spec.instruct_path = src;
    spec.output_path = tmp.file("self_out.safetensors");
    merge_checkpoints(spec);
    CheckpointReader r(spec.output_path);
    for (const Tensor& want : ts) {
      CAPTURE(lam.to_string());
      CAPTURE(want.name);
      REQUIRE(r.read_tensor(want.name).data == want.data);
    }
  }
}

TEST_CASE("instruct-only tensors ride along verbatim") {
  TempDir tmp;
  const Tensor shared_b = testutil::random_tensor("body.weight", DType::F32, {8}, 61);
  const Tensor shared_i = testutil::random_tensor("body.weight", DType::F32, {8}, 62);
  const Tensor extra = testutil::random_tensor("lm_head.extra", DType::F32, {6}, 63);
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({shared_b}, bp);
  write_checkpoint({shared_i, extra}, ip);

  MergeSpec spec;
  spec.lambda = Rational(3, 8);
  spec.base_path = bp;
  spec.instruct_path = ip;
  spec.output_path = tmp.file("out.safetensors");
  const MergeReport rep = merge_checkpoints(spec);

  REQUIRE(rep.items.size() == 2);
  CHECK(rep.copied_instruct_only == 1);
  CHECK(rep.interpolated == 1);
  bool saw_extra = false;
  for (const auto& it : rep.items) {
    if (it.name == "lm_head.extra") {
      CHECK(it.action == MergeAction::CopiedInstructOnly);
      saw_extra = true;
    }
  }
  CHECK(saw_extra);

  CheckpointReader r(spec.output_path);
  CHECK(r.read_tensor("lm_head.extra").data == extra.data);
}

TEST_CASE("vocab growth blends shared rows and copies the new rows") {
  TempDir tmp;
  Tensor b = Tensor::make("embed", DType::F32, {4, 8});
  Tensor i = Tensor::make("embed", DType::F32, {6, 8});
  for (std::uint64_t k = 0; k < b.num_elements(); ++k) b.set(k, 0.25 * double(k) - 3.0);
  for (std::uint64_t k = 0; k < i.num_elements(); ++k) i.set(k, -0.125 * double(k) + 1.0);
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({b}, bp);
  write_checkpoint({i}, ip);

  MergeSpec spec;
  spec.lambda = Rational(1, 2);
  spec.base_path = bp;
  spec.instruct_path = ip;
  spec.output_path = tmp.file("out.safetensors");
  const MergeReport rep = merge_checkpoints(spec);
  REQUIRE(rep.items.size() == 1);
  CHECK(rep.items[0].action == MergeAction::RowwiseMixed);
  CHECK(rep.rowwise_mixed == 1);

  CheckpointReader r(spec.output_path);
  const Tensor out = r.read_tensor("embed");
  REQUIRE((out.shape == std::vector<std::uint64_t>{6, 8}));
  // shared rows against the scalar route
  for (std::uint64_t k = 0; k < 32; ++k) {
    const float want = static_cast<float>(blend_ref(b.get(k), i.get(k), 0.5));
    float got;
    std::memcpy(&got, out.data.data() + 4 * k, 4);
    CAPTURE(k);
    REQUIRE(detail::f32_bits(got) == detail::f32_bits(want));
  }
  // grown rows verbatim from instruct
  CHECK(std::memcmp(out.data.data() + 32 * 4, i.data.data() + 32 * 4, 16 * 4) == 0);
}

TEST_CASE("base-only tensors refuse by default and copy on request") {
  TempDir tmp;
  const Tensor shared_b = testutil::random_tensor("w", DType::F32, {4}, 71);
  const Tensor shared_i = testutil::random_tensor("w", DType::F32, {4}, 72);
  const Tensor orphan = testutil::random_tensor("only.base", DType::F32, {3}, 73);
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({shared_b, orphan}, bp);
  write_checkpoint({shared_i}, ip);

  MergeSpec spec;
  spec.lambda = Rational(1, 2);
  spec.base_path = bp;
  spec.instruct_path = ip;
  spec.output_path = tmp.file("out.safetensors");
  CHECK_THROWS_WITH_AS(merge_checkpoints(spec), doctest::Contains("only.base"),
                       ValidationError);

  spec.base_only_policy = BaseOnlyPolicy::CopyBase;
  const MergeReport rep = merge_checkpoints(spec);
  CHECK(rep.copied_base_only == 1);
  CheckpointReader r(spec.output_path);
  CHECK(r.read_tensor("only.base").data == orphan.data);
}

TEST_CASE("shape conflicts outside the row-growth rule are rejected") {
  TempDir tmp;
  auto pair_with = [&](std::vector<std::uint64_t> bs, std::vector<std::uint64_t> is) {
    write_checkpoint({testutil::random_tensor("t", DType::F32, bs, 81)},
                     tmp.file("b.safetensors"));
    write_checkpoint({testutil::random_tensor("t", DType::F32, is, 82)},
                     tmp.file("i.safetensors"));
    MergeSpec spec;
    spec.lambda = Rational(1, 2);
    spec.base_path = tmp.file("b.safetensors");
    spec.instruct_path = tmp.file("i.safetensors");
    spec.output_path = tmp.file("o.safetensors");
    return spec;
  };

  // trailing dim differs
  CHECK_THROWS_AS(merge_checkpoints(pair_with({4, 8}, {6, 9})), ValidationError);
  // instruct is the smaller one (vocab shrink is not covered)
  CHECK_THROWS_AS(merge_checkpoints(pair_with({6, 8}, {4, 8})), ValidationError);
  // rank 3 never qualifies
  CHECK_THROWS_AS(merge_checkpoints(pair_with({2, 3, 4}, {5, 3, 4})), ValidationError);

  // dtype mismatch beats any shape logic
  write_checkpoint({testutil::random_tensor("t", DType::F32, {4}, 83)},
                   tmp.file("b.safetensors"));
  write_checkpoint({testutil::random_tensor("t", DType::F16, {4}, 84)},
                   tmp.file("i.safetensors"));
  MergeSpec spec;
  spec.lambda = Rational(1, 2);
  spec.base_path = tmp.file("b.safetensors");
  spec.instruct_path = tmp.file("i.safetensors");
  spec.output_path = tmp.file("o.safetensors");
  CHECK_THROWS_WITH_AS(merge_checkpoints(spec), doctest::Contains("dtype"),
                       ValidationError);
}

TEST_CASE("merge records lambda, input digests and carried metadata") {
  TempDir tmp;
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({testutil::random_tensor("w", DType::F32, {4}, 91)}, bp,
                   {{"family", "base-side"}, {"base_only_key", "kept"}});
  write_checkpoint({testutil::random_tensor("w", DType::F32, {4}, 92)}, ip,
                   {{"family", "instruct-side"}});

  MergeSpec spec;
  spec.lambda = Rational(5, 8);
  spec.base_path = bp;
  spec.instruct_path = ip;
  spec.output_path = tmp.file("out.safetensors");
  merge_checkpoints(spec);

  const CheckpointManifest m = read_manifest(spec.output_path);
  CHECK(m.metadata.at("pad_lambda") == "5/8");
  CHECK(m.metadata.at("pad_base_digest") == file_digest(bp));
  CHECK(m.metadata.at("pad_instruct_digest") == file_digest(ip));
  CHECK(m.metadata.at("family") == "instruct-side");  // instruct wins collisions
  CHECK(m.metadata.at("base_only_key") == "kept");
}

TEST_CASE("endpoint merges report zero residual") {
  TempDir tmp;
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({testutil::random_tensor("w", DType::BF16, {64}, 93),
                    testutil::random_tensor("v", DType::F32, {8, 8}, 94)},
                   bp);
  write_checkpoint({testutil::random_tensor("w", DType::BF16, {64}, 95),
                    testutil::random_tensor("v", DType::F32, {8, 8}, 96)},
                   ip);
  for (int end : {0, 1}) {
    MergeSpec spec;
    spec.lambda = Rational(end, 1);
    spec.base_path = bp;
    spec.instruct_path = ip;
    spec.output_path = tmp.file("out.safetensors");
    const MergeReport rep = merge_checkpoints(spec);
    CHECK(rep.max_endpoint_residual == 0.0);

    CheckpointReader r(spec.output_path);
    CheckpointReader src(end == 0 ? bp : ip);
    for (const auto& e : src.manifest().entries) {
      REQUIRE(r.read_tensor(e.name).data == src.read_tensor(e.name).data);
    }
  }
}

TEST_CASE("sweep materializes the full grid with stable names") {
  TempDir tmp;
  const std::string bp = tmp.file("base.safetensors");
  const std::string ip = tmp.file("instruct.safetensors");
  write_checkpoint({testutil::random_tensor("w", DType::F32, {32}, 97)}, bp);
  write_checkpoint({testutil::random_tensor("w", DType::F32, {32}, 98)}, ip);

  const auto outs = sweep_merge(bp, ip, tmp.file("sweep"), lambda_grid());
  REQUIRE(outs.size() == 9);
  const char* want[] = {"lambda_0_1.safetensors", "lambda_1_8.safetensors",
                        "lambda_1_4.safetensors", "lambda_3_8.safetensors",
                        "lambda_1_2.safetensors", "lambda_5_8.safetensors",
                        "lambda_3_4.safetensors", "lambda_7_8.safetensors",
                        "lambda_1_1.safetensors"};
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(outs[k].first == lambda_grid()[k]);
    CHECK(std::filesystem::path(outs[k].second).filename().string() == want[k]);
    CHECK(std::filesystem::exists(outs[k].second));
  }

  // single-point sweep at 0 equals the base tensors byte for byte
  const auto zero = sweep_merge(bp, ip, tmp.file("zero"), {Rational(0, 1)});
  REQUIRE(zero.size() == 1);
  CheckpointReader rz(zero[0].second);
  CheckpointReader rb(bp);
  CHECK(rz.read_tensor("w").data == rb.read_tensor("w").data);

  // repeating a grid point reproduces the output file exactly
  const auto once = sweep_merge(bp, ip, tmp.file("rep1"), {Rational(3, 8)});
  const auto again = sweep_merge(bp, ip, tmp.file("rep2"), {Rational(3, 8)});
  CHECK(file_digest(once[0].second) == file_digest(again[0].second));
}
