// Evaluation runner: drives one backend (one strength λ) over a set of
// datasets, persisting per-cell results for cheap resumption.
//
// Layout under out_dir:
//   results/<num_den>/<dataset>.jsonl   one line per evaluated cell
//                                       (example × template × style),
//                                       append-only; the resume unit
//   results/<num_den>/<dataset>.json    compacted scores, written once every
//                                       cell of the dataset is present
//   manifest.json                       seed, backend specs + digests,
//                                       dataset digests, cell status
//
// A rerun skips cells already in the log; a finished dataset whose inputs'
// digests match is skipped entirely. Changed inputs (dataset bytes, backend
// checkpoint, seed) are refused with instructions rather than silently mixed
// into existing results.
//
// Workers only change how cells are computed, never what is written: results
// land in preallocated slots and are persisted in slot order, so output
// bytes are identical for any worker count. On a backend failure the
// completed cells are flushed before the error propagates.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pad/analysis.hpp"
#include "pad/dataset.hpp"
#include "pad/icl.hpp"
#include "pad/rational.hpp"

namespace pad {

struct EvalOptions {
  std::string backend_spec;       // "tiny:<checkpoint>" or "http(s)://..."
  std::string backend_digest;     // checkpoint digest, "" for remote backends
  Rational lambda;                // strength tag for the output tree
  std::vector<LoadedDataset> datasets;
  std::vector<Style> styles;      // empty = every style the dataset declares
  std::uint64_t seed = 0;
  std::string out_dir;
  int workers = 1;
  LengthNorm length_norm = LengthNorm::LogPerToken;
};

// Returns the compacted result paths (one per dataset). Throws BackendError
// after persisting completed cells when the backend fails mid-run.
std::vector<std::string> run_eval(const EvalOptions& options);

// Reads every compacted result under out_dir and assembles per-strength
// model scores, sorted by λ. Throws when nothing is there or files disagree
// with their own recorded aggregates.
std::vector<ModelScore> collect_results(const std::string& out_dir);

}  // namespace pad
