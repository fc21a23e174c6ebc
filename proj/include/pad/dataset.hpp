// Dataset ingestion: a TOML-style sidecar config describing the task plus a
// JSONL file of examples.
//
// Sidecar keys:
//   name = "trivia"            required
//   data = "trivia.jsonl"      required, resolved relative to the config file
//   metric = "accuracy"        required, one of the known metric kinds
//   shots = 5                  required, non-negative
//   styles = ["MC", "FMC"]     required
//   parser_profile = "finqa"   optional (default "default"), for style G
//   group_field = "category"   optional (default "group"): JSONL key read
//                              into each example's group
//   declared_size = 1105       optional; a mismatch with the actual example
//                              count is reported as a warning, not an error
//   max_tokens = 32            optional generation budget for style G
//   [[template]]               one per prompt template
//   name = "t0"
//   style = "MC"
//   body = '''...'''
//
// JSONL lines are objects. Reserved keys: "id" (required string), "choices"
// (array of strings), "gold" (integer index into choices), "gold_texts"
// (array of strings). Every other scalar value becomes a template field,
// stringified for numbers and booleans; nested arrays/objects are rejected
// with the offending line number.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pad/icl.hpp"

namespace pad {

struct LoadedDataset {
  DatasetSpec spec;
  std::string config_path;
  std::string data_path;
  std::string parser_profile = "default";
  int max_tokens = 32;
  std::int64_t declared_size = -1;        // -1 = not declared
  std::string digest;                     // over config bytes + data bytes
  std::vector<std::string> warnings;      // e.g. declared-size mismatch
};

LoadedDataset load_dataset(const std::string& config_path);

}  // namespace pad
