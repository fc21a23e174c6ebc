#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "pad/backend.hpp"
#include "pad/checkpoint.hpp"
#include "pad/error.hpp"
#include "pad/merge.hpp"
#include "pad/tiny_lm.hpp"
#include "test_util.hpp"
#include "tiny_fixtures.hpp"

using namespace pad;
using testutil::TempDir;

namespace {

// Independent forward pass used as the oracle for merged-model scoring: its
// own pooling, matmul and softmax code over plain double vectors.
std::vector<double> ref_next_logprobs(const std::string& vocab, int window, std::size_t dim,
                                      const std::vector<double>& embed,
                                      const std::vector<double>& proj,
                                      const std::vector<int>& ctx) {
  const std::size_t V = vocab.size();
  std::vector<double> pooled(dim, 0.0);
  const std::size_t take = std::min<std::size_t>(ctx.size(), std::size_t(window));
  for (std::size_t j = ctx.size() - take; j < ctx.size(); ++j) {
    for (std::size_t r = 0; r < dim; ++r) {
      pooled[r] += embed[std::size_t(ctx[j]) * dim + r];
    }
  }
  if (take > 0) {
    for (double& v : pooled) v /= double(take);
  }
  std::vector<double> logits(V, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t r = 0; r < dim; ++r) logits[v] += pooled[r] * proj[r * V + v];
  }
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (double& l : logits) l -= lse;
  return logits;
}

}  // namespace

TEST_CASE("empty continuation scores to an empty list") {
  TempDir tmp;
  testutil::write_random_tiny_checkpoint(tmp.file("m.safetensors"), "ABCD", 2, 3, 5);
  TinyLM lm = TinyLM::load(tmp.file("m.safetensors"));
  const ScoringResponse r = lm.score({"ABBA", ""});
  CHECK(r.token_logprobs.empty());
  CHECK(r.token_count == 0);
  CHECK(r.total() == 0.0);
}

TEST_CASE("uniform logits give log(1/V)") {
  TempDir tmp;
  // zero projection: logits are all zero whatever the context
  testutil::write_tiny_checkpoint(tmp.file("z.safetensors"), "ABCD", 2, 3,
                                  std::vector<double>(12, 0.7), std::vector<double>(12, 0.0));
  TinyLM lm = TinyLM::load(tmp.file("z.safetensors"));
  const ScoringResponse r = lm.score({"AB", "C"});
  REQUIRE(r.token_count == 1);
  CHECK(r.token_logprobs[0] == doctest::Approx(-1.3862943611198906).epsilon(1e-12));

  // empty context pools to the zero vector: uniform even with nonzero proj
  testutil::write_random_tiny_checkpoint(tmp.file("r.safetensors"), "AB", 2, 3, 9);
  TinyLM lm2 = TinyLM::load(tmp.file("r.safetensors"));
  const ScoringResponse r2 = lm2.score({"", "A"});
  REQUIRE(r2.token_count == 1);
  CHECK(r2.token_logprobs[0] == doctest::Approx(-0.6931471805599453).epsilon(1e-12));
}

// Hand-built 2x2 model; expected values frozen from a by-hand chain-rule
// computation (softmax worked out independently).
TEST_CASE("two-token continuation follows the chain rule") {
  TempDir tmp;
  testutil::write_tiny_checkpoint(tmp.file("h.safetensors"), "AB", 1, 2,
                                  {1.0, 0.5,    // embed A
                                   -0.5, 2.0},  // embed B
                                  {0.3, -0.2,   // proj row 0
                                   0.1, 0.4});  // proj row 1
  TinyLM lm = TinyLM::load(tmp.file("h.safetensors"));
  const ScoringResponse r = lm.score({"A", "BA"});
  REQUIRE(r.token_count == 2);
  CHECK(r.token_logprobs[0] == doctest::Approx(-0.883382155418777).epsilon(1e-12));
  CHECK(r.token_logprobs[1] == doctest::Approx(-1.2058650684421959).epsilon(1e-12));
  CHECK(r.total() == doctest::Approx(-2.0892472238609727).epsilon(1e-12));
}

TEST_CASE("score chains additively over split continuations") {
  TempDir tmp;
  testutil::write_random_tiny_checkpoint(tmp.file("m.safetensors"), "ABCDE \n", 3, 4, 17);
  TinyLM lm = TinyLM::load(tmp.file("m.safetensors"));
  const std::string prompt = "AB CD";
  const std::string c1 = "E A";
  const std::string c2 = "\nBCD";
  const double whole = lm.score({prompt, c1 + c2}).total();
  const double split = lm.score({prompt, c1}).total() + lm.score({prompt + c1, c2}).total();
  CHECK(whole == doctest::Approx(split).epsilon(1e-9));
}

TEST_CASE("next-token distribution is normalized") {
  TempDir tmp;
  testutil::write_random_tiny_checkpoint(tmp.file("m.safetensors"), "ABCD", 2, 3, 23);
  TinyLM lm = TinyLM::load(tmp.file("m.safetensors"));
  for (const std::vector<int>& ctx :
       {std::vector<int>{}, std::vector<int>{0}, std::vector<int>{1, 2, 3, 0}}) {
    const std::vector<double> lp = lm.next_token_logprobs(ctx);
    double sum = 0.0;
    for (double v : lp) {
      CHECK(v <= 1e-9);
      sum += std::exp(v);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("generation is greedy, stops on stop sequences and is repeatable") {
  TempDir tmp;
  // positive pooled values and a projection that always favors token A
  testutil::write_tiny_checkpoint(tmp.file("g.safetensors"), "AB", 1, 2,
                                  {1.0, 1.0, 1.0, 1.0}, {1.0, 0.0, 1.0, 0.0});
  TinyLM lm = TinyLM::load(tmp.file("g.safetensors"));

  GenerationRequest req;
  req.prompt = "A";
  req.max_tokens = 3;
  req.stop_sequences = {"\n"};
  const GenerationResult r = lm.generate(req);
  CHECK(r.text == "AAA");
  CHECK(r.truncated);  // budget ended generation, no stop seen

  // stop equal to the first generated token
  req.stop_sequences = {"A"};
  const GenerationResult r2 = lm.generate(req);
  CHECK(r2.text == "");
  CHECK_FALSE(r2.truncated);

  // zero budget
  req.max_tokens = 0;
  CHECK(lm.generate(req).text == "");

  // repeatability
  req.max_tokens = 5;
  req.stop_sequences = {};
  CHECK(lm.generate(req).text == lm.generate(req).text);
}

TEST_CASE("loading rejects broken tiny checkpoints") {
  TempDir tmp;
  // missing tiny.proj
  {
    Tensor e = Tensor::make("tiny.embed", DType::F64, {2, 2});
    write_checkpoint({e}, tmp.file("a.safetensors"),
                     {{"tiny.vocab", "AB"}, {"tiny.window", "1"}});
    CHECK_THROWS_WITH_AS(TinyLM::load(tmp.file("a.safetensors")),
                         doctest::Contains("tiny.proj"), ValidationError);
  }
  // proj does not transpose embed
  {
    Tensor e = Tensor::make("tiny.embed", DType::F64, {2, 3});
    Tensor p = Tensor::make("tiny.proj", DType::F64, {2, 2});
    write_checkpoint({e, p}, tmp.file("b.safetensors"),
                     {{"tiny.vocab", "AB"}, {"tiny.window", "1"}});
    CHECK_THROWS_AS(TinyLM::load(tmp.file("b.safetensors")), ValidationError);
  }
  // vocab length disagrees with embed rows
  {
    Tensor e = Tensor::make("tiny.embed", DType::F64, {2, 2});
    Tensor p = Tensor::make("tiny.proj", DType::F64, {2, 2});
    write_checkpoint({e, p}, tmp.file("c.safetensors"),
                     {{"tiny.vocab", "ABC"}, {"tiny.window", "1"}});
    CHECK_THROWS_AS(TinyLM::load(tmp.file("c.safetensors")), ValidationError);
  }
  // metadata gone entirely
  {
    Tensor e = Tensor::make("tiny.embed", DType::F64, {2, 2});
    Tensor p = Tensor::make("tiny.proj", DType::F64, {2, 2});
    write_checkpoint({e, p}, tmp.file("d.safetensors"));
    CHECK_THROWS_WITH_AS(TinyLM::load(tmp.file("d.safetensors")),
                         doctest::Contains("tiny.vocab"), ValidationError);
  }
  // bad window value
  {
    Tensor e = Tensor::make("tiny.embed", DType::F64, {2, 2});
    Tensor p = Tensor::make("tiny.proj", DType::F64, {2, 2});
    write_checkpoint({e, p}, tmp.file("e.safetensors"),
                     {{"tiny.vocab", "AB"}, {"tiny.window", "zero"}});
    CHECK_THROWS_AS(TinyLM::load(tmp.file("e.safetensors")), ValidationError);
  }
  // byte outside the vocabulary at scoring time
  testutil::write_random_tiny_checkpoint(tmp.file("f.safetensors"), "AB", 1, 2, 3);
  TinyLM lm = TinyLM::load(tmp.file("f.safetensors"));
  CHECK_THROWS_AS(lm.score({"A", "AXB"}), ValidationError);
}

TEST_CASE("merge endpoints load into behaviorally identical models") {
  TempDir tmp;
  testutil::write_random_tiny_checkpoint(tmp.file("a.safetensors"), "ABCD", 2, 3, 31,
                                         DType::F64);
  testutil::write_random_tiny_checkpoint(tmp.file("b.safetensors"), "ABCD", 2, 3, 32,
                                         DType::F64);
  const auto outs =
      sweep_merge(tmp.file("a.safetensors"), tmp.file("b.safetensors"), tmp.file("s"),
                  {Rational(0, 1), Rational(1, 1)});

  TinyLM at0 = TinyLM::load(outs[0].second);
  TinyLM at1 = TinyLM::load(outs[1].second);
  TinyLM a = TinyLM::load(tmp.file("a.safetensors"));
  TinyLM b = TinyLM::load(tmp.file("b.safetensors"));

  const ScoringRequest req{"ABC", "DAB"};
  const auto ra = a.score(req), r0 = at0.score(req);
  const auto rb = b.score(req), r1 = at1.score(req);
  REQUIRE(r0.token_count == ra.token_count);
  REQUIRE(r1.token_count == rb.token_count);
  for (std::size_t i = 0; i < ra.token_logprobs.size(); ++i) {
    CHECK(r0.token_logprobs[i] == ra.token_logprobs[i]);
    CHECK(r1.token_logprobs[i] == rb.token_logprobs[i]);
  }
}

TEST_CASE("half-merged model matches an independent forward over averaged weights") {
  TempDir tmp;
  const std::string vocab = "ABCD";
  const int window = 2;
  const std::size_t dim = 3, V = vocab.size();
  testutil::write_random_tiny_checkpoint(tmp.file("a.safetensors"), vocab, window, dim, 41,
                                         DType::F64);
  testutil::write_random_tiny_checkpoint(tmp.file("b.safetensors"), vocab, window, dim, 42,
                                         DType::F64);

  MergeSpec spec;
  spec.lambda = Rational(1, 2);
  spec.base_path = tmp.file("a.safetensors");
  spec.instruct_path = tmp.file("b.safetensors");
  spec.output_path = tmp.file("half.safetensors");
  merge_checkpoints(spec);
  TinyLM merged = TinyLM::load(spec.output_path);

  // oracle: average the raw weights ourselves, run the reference forward
  CheckpointReader ra(spec.base_path), rb(spec.instruct_path);
  const Tensor ea = ra.read_tensor("tiny.embed"), eb = rb.read_tensor("tiny.embed");
  const Tensor pa = ra.read_tensor("tiny.proj"), pb = rb.read_tensor("tiny.proj");
  std::vector<double> embed(V * dim), proj(dim * V);
  for (std::size_t i = 0; i < embed.size(); ++i) embed[i] = (ea.get(i) + eb.get(i)) / 2.0;
  for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = (pa.get(i) + pb.get(i)) / 2.0;

  for (const std::vector<int>& ctx :
       {std::vector<int>{}, std::vector<int>{2}, std::vector<int>{0, 3, 1}}) {
    const auto got = merged.next_token_logprobs(ctx);
    const auto want = ref_next_logprobs(vocab, window, dim, embed, proj, ctx);
    REQUIRE(got.size() == want.size());
    for (std::size_t v = 0; v < V; ++v) {
      CHECK(got[v] == doctest::Approx(want[v]).epsilon(1e-9));
    }
  }
}

TEST_CASE("backend factory dispatches on the descriptor") {
  TempDir tmp;
  testutil::write_random_tiny_checkpoint(tmp.file("m.safetensors"), "AB", 1, 2, 51);
  auto b = make_backend("tiny:" + tmp.file("m.safetensors"));
  CHECK(b->score({"A", "B"}).token_count == 1);
  CHECK_THROWS_AS(make_backend("ftp://nope"), ValidationError);
  CHECK_THROWS_AS(make_backend("tiny:/missing/file.safetensors"), IoError);
}
