#include "pad/merge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>

#include "pad/checkpoint.hpp"
#include "pad/error.hpp"
#include "pad/merge_kernels.hpp"

namespace pad {

const char* merge_action_name(MergeAction a) {
  switch (a) {
    case MergeAction::Interpolated: return "interpolated";
    case MergeAction::CopiedInstructOnly: return "copied_instruct_only";
    case MergeAction::RowwiseMixed: return "rowwise_mixed";
    case MergeAction::CopiedBaseOnly: return "copied_base_only";
  }
  return "?";
}

namespace {

void lerp(ExecMode exec, DType dtype, const unsigned char* a, const unsigned char* b,
          unsigned char* out, std::uint64_t n, double lambda) {
  if (exec == ExecMode::Serial) {
    kernels::lerp_serial(dtype, a, b, out, n, lambda);
  } else {
    kernels::lerp_parallel(dtype, a, b, out, n, lambda);
  }
}

void check_lambda_range(const Rational& lambda) {
  if (lambda < Rational(0) || Rational(1) < lambda) {
    throw ValidationError("lambda " + lambda.to_string() + " outside [0, 1]");
  }
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// True when the vocab-growth rule covers the pair: both 2-D, same trailing
// dim, instruct strictly taller.
bool rowwise_applies(const TensorMeta& b, const TensorMeta& i) {
  return b.shape.size() == 2 && i.shape.size() == 2 && b.shape[1] == i.shape[1] &&
         i.shape[0] > b.shape[0];
}

// Max elementwise |got - want| between two buffers that ought to be verbatim
// copies of each other. Bitwise equality (the expected case) short-circuits;
// matching NaNs count as zero distance.
double copy_residual(DType dtype, const unsigned char* got, const unsigned char* want,
                     std::size_t bytes) {
  if (bytes == 0 || std::memcmp(got, want, bytes) == 0) return 0.0;
  const std::size_t sz = dtype_size(dtype);
  double worst = 0.0;
  for (std::size_t off = 0; off + sz <= bytes; off += sz) {
    if (std::memcmp(got + off, want + off, sz) == 0) continue;
    const double g = load_scalar(dtype, got + off);
    const double w = load_scalar(dtype, want + off);
    const double d = std::fabs(g - w);
    worst = std::isnan(d) ? std::numeric_limits<double>::infinity() : std::max(worst, d);
  }
  return worst;
}

}  // namespace

Tensor interpolate_tensor(const Tensor& base, const Tensor& instruct,
                          const Rational& lambda, ExecMode exec) {
  check_lambda_range(lambda);
  if (base.dtype != instruct.dtype) {
    throw ValidationError("dtype mismatch for tensor \"" + base.name + "\": " +
                          dtype_name(base.dtype) + " vs " + dtype_name(instruct.dtype));
  }
  if (base.shape != instruct.shape) {
    throw ValidationError("shape mismatch for tensor \"" + base.name + "\": " +
                          shape_string(base.shape) + " vs " + shape_string(instruct.shape));
  }

  Tensor out;
  out.name = base.name;
  out.dtype = base.dtype;
  out.shape = base.shape;
  if (lambda == Rational(0)) {
    out.data = base.data;
  } else if (lambda == Rational(1)) {
    out.data = instruct.data;
  } else {
    out.data.resize(base.data.size());
    lerp(exec, base.dtype, base.data.data(), instruct.data.data(), out.data.data(),
         base.num_elements(), lambda.value());
  }
  return out;
}

MergeReport merge_checkpoints(const MergeSpec& spec) {
  check_lambda_range(spec.lambda);
  CheckpointReader base(spec.base_path);
  CheckpointReader instruct(spec.instruct_path);
  const CheckpointManifest& mb = base.manifest();
  const CheckpointManifest& mi = instruct.manifest();

  std::set<std::string> names;
  for (const auto& e : mb.entries) names.insert(e.name);
  for (const auto& e : mi.entries) names.insert(e.name);

  // Classify every tensor up front so validation errors surface before any
  // output is written, and so the writer plan is complete.
  MergeReport report;
  std::vector<PlannedTensor> plan;
  for (const std::string& name : names) {
    const bool in_base = mb.contains(name);
    const bool in_instruct = mi.contains(name);
    if (in_base && in_instruct) {
      const TensorMeta& tb = mb.at(name);
      const TensorMeta& ti = mi.at(name);
      if (tb.dtype != ti.dtype) {
        throw ValidationError("dtype mismatch for tensor \"" + name + "\": " +
                              dtype_name(tb.dtype) + " vs " + dtype_name(ti.dtype));
      }
      if (tb.shape == ti.shape) {
        report.items.push_back({name, MergeAction::Interpolated});
        plan.push_back({name, tb.dtype, tb.shape});
      } else if (rowwise_applies(tb, ti)) {
        report.items.push_back({name, MergeAction::RowwiseMixed});
        plan.push_back({name, ti.dtype, ti.shape});
      } else {
        throw ValidationError("shape mismatch for tensor \"" + name + "\" not covered by the row-wise rule: " +
                              shape_string(tb.shape) + " vs " + shape_string(ti.shape));
      }
    } else if (in_instruct) {
      report.items.push_back({name, MergeAction::CopiedInstructOnly});
      const TensorMeta& ti = mi.at(name);
      plan.push_back({name, ti.dtype, ti.shape});
    } else {
      if (spec.base_only_policy == BaseOnlyPolicy::Error) {
        throw ValidationError("tensor \"" + name + "\" exists only in the base checkpoint " +
                              spec.base_path + " (pass the copy policy to keep it)");
      }
      report.items.push_back({name, MergeAction::CopiedBaseOnly});
      const TensorMeta& tb = mb.at(name);
      plan.push_back({name, tb.dtype, tb.shape});
    }
  }

  std::map<std::string, std::string> metadata = mb.metadata;
  for (const auto& [k, v] : mi.metadata) metadata[k] = v;
  metadata["pad_lambda"] = spec.lambda.to_string();
  metadata["pad_base_digest"] = file_digest(spec.base_path);
  metadata["pad_instruct_digest"] = file_digest(spec.instruct_path);
  for (const auto& [k, v] : spec.extra_metadata) metadata[k] = v;

  std::map<std::string, MergeAction> action_of;
  for (const auto& it : report.items) action_of[it.name] = it.action;

  const bool at_zero = spec.lambda == Rational(0);
  const bool at_one = spec.lambda == Rational(1);
  const double lam = spec.lambda.value();

  CheckpointWriter writer(spec.output_path, std::move(plan), metadata);
  for (const PlannedTensor& p : writer.plan()) {
    const MergeAction action = action_of.at(p.name);
    std::vector<unsigned char> payload;
    switch (action) {
      case MergeAction::Interpolated: {
        const Tensor tb = base.read_tensor(p.name);
        const Tensor ti = instruct.read_tensor(p.name);
        if (at_zero) {
          payload = tb.data;
        } else if (at_one) {
          payload = ti.data;
        } else {
          payload.resize(tb.data.size());
          lerp(spec.exec, p.dtype, tb.data.data(), ti.data.data(), payload.data(),
               tb.num_elements(), lam);
        }
        if (at_zero || at_one) {
          const Tensor& src = at_zero ? tb : ti;
          report.max_endpoint_residual =
              std::max(report.max_endpoint_residual,
                       copy_residual(p.dtype, payload.data(), src.data.data(), payload.size()));
        }
        ++report.interpolated;
        break;
      }
      case MergeAction::RowwiseMixed: {
        const Tensor tb = base.read_tensor(p.name);
        const Tensor ti = instruct.read_tensor(p.name);
        // Row-major layout makes the shared rows a contiguous prefix.
        const std::size_t shared_bytes = tb.data.size();
        payload.resize(ti.data.size());
        if (at_zero) {
          std::memcpy(payload.data(), tb.data.data(), shared_bytes);
        } else if (at_one) {
          std::memcpy(payload.data(), ti.data.data(), shared_bytes);
        } else {
          lerp(spec.exec, p.dtype, tb.data.data(), ti.data.data(), payload.data(),
               tb.num_elements(), lam);
        }
        std::memcpy(payload.data() + shared_bytes, ti.data.data() + shared_bytes,
                    ti.data.size() - shared_bytes);
        if (at_zero || at_one) {
          const Tensor& src = at_zero ? tb : ti;
          report.max_endpoint_residual =
              std::max(report.max_endpoint_residual,
                       copy_residual(p.dtype, payload.data(), src.data.data(), shared_bytes));
        }
        ++report.rowwise_mixed;
        break;
      }
      case MergeAction::CopiedInstructOnly: {
        payload = instruct.read_tensor(p.name).data;
        ++report.copied_instruct_only;
        break;
      }
      case MergeAction::CopiedBaseOnly: {
        payload = base.read_tensor(p.name).data;
        ++report.copied_base_only;
        break;
      }
    }
    writer.write_payload(payload.data(), payload.size());
  }
  writer.finish();
  return report;
}

std::vector<std::pair<Rational, std::string>> sweep_merge(
    const std::string& base_path, const std::string& instruct_path,
    const std::string& out_dir, const std::vector<Rational>& grid,
    BaseOnlyPolicy base_only_policy, ExecMode exec) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + out_dir + ": " + ec.message());
  }

  std::vector<std::pair<Rational, std::string>> out;
  out.reserve(grid.size());
  for (const Rational& lambda : grid) {
    MergeSpec spec;
    spec.lambda = lambda;
    spec.base_path = base_path;
    spec.instruct_path = instruct_path;
    spec.output_path = out_dir + "/lambda_" + lambda.file_tag() + ".safetensors";
    spec.base_only_policy = base_only_policy;
    spec.exec = exec;
    merge_checkpoints(spec);
    out.emplace_back(lambda, spec.output_path);
  }
  return out;
}

}  // namespace pad
