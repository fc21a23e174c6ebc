#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pad/rational.hpp"
#include "pad/tensor.hpp"

namespace pad {

// What to do with tensors present in the base checkpoint but absent from the
// instruct one. Silently dropping weights would corrupt a model, so the
// default refuses.
enum class BaseOnlyPolicy { Error, CopyBase };

enum class ExecMode { Parallel, Serial };

struct MergeSpec {
  Rational lambda;            // in [0, 1]
  std::string base_path;
  std::string instruct_path;
  std::string output_path;
  BaseOnlyPolicy base_only_policy = BaseOnlyPolicy::Error;
  ExecMode exec = ExecMode::Parallel;
  // Extra header metadata for the output (merged after the recorded lambda and
  // input digests; these keys win on collision).
  std::map<std::string, std::string> extra_metadata;
};

enum class MergeAction { Interpolated, CopiedInstructOnly, RowwiseMixed, CopiedBaseOnly };

const char* merge_action_name(MergeAction a);

struct MergeReport {
  struct Item {
    std::string name;
    MergeAction action;
  };
  // Every tensor in the union of both manifests, in output (name) order.
  std::vector<Item> items;
  std::size_t interpolated = 0;
  std::size_t copied_instruct_only = 0;
  std::size_t rowwise_mixed = 0;
  std::size_t copied_base_only = 0;
  // Largest |written - endpoint| over all elements when lambda is 0 or 1
  // (endpoint merges are verbatim copies, so this should measure 0.0).
  // Stays 0.0 for interior lambdas.
  double max_endpoint_residual = 0.0;
};

// Elementwise (1-lambda)*base + lambda*instruct in F64 accumulation, cast back
// to the input dtype with round-to-nearest-even. lambda 0 and 1 are verbatim
// byte copies, so endpoints reproduce inputs exactly (arithmetic would flip
// -0.0 signs and launder NaN payloads).
Tensor interpolate_tensor(const Tensor& base, const Tensor& instruct,
                          const Rational& lambda, ExecMode exec = ExecMode::Parallel);

// Merges two checkpoints at the given lambda, streaming one tensor at a time:
//  - names in both with equal dtype+shape: interpolated;
//  - names only in instruct: copied verbatim (they only exist adapted, which
//    is the lambda=1 end);
//  - names only in base: per base_only_policy;
//  - 2-D pairs with identical trailing dim where instruct has strictly more
//    leading rows (vocab growth): shared rows interpolated, extra rows copied
//    verbatim from instruct.
// The output header metadata carries both inputs' metadata (instruct wins on
// collision) plus pad_lambda / pad_base_digest / pad_instruct_digest.
MergeReport merge_checkpoints(const MergeSpec& spec);

// One merge_checkpoints call per grid point, written to
// <out_dir>/lambda_<num>_<den>.safetensors. Returns (lambda, path) in grid
// order.
std::vector<std::pair<Rational, std::string>> sweep_merge(
    const std::string& base_path, const std::string& instruct_path,
    const std::string& out_dir, const std::vector<Rational>& grid,
    BaseOnlyPolicy base_only_policy = BaseOnlyPolicy::Error,
    ExecMode exec = ExecMode::Parallel);

}  // namespace pad
