#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pad/tensor.hpp"

namespace pad {

struct TensorMeta {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::uint64_t begin = 0;  // offsets into the data buffer (after the header)
  std::uint64_t end = 0;

  std::uint64_t num_elements() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

// Parsed header of one checkpoint file. Entries are kept sorted by offset;
// the format requires them to tile the data buffer with no gaps or overlaps.
struct CheckpointManifest {
  std::string path;
  std::uint64_t header_bytes = 0;
  std::uint64_t data_bytes = 0;
  std::vector<TensorMeta> entries;
  std::unordered_map<std::string, std::size_t> index;
  std::map<std::string, std::string> metadata;

  bool contains(const std::string& name) const { return index.count(name) != 0; }
  const TensorMeta& at(const std::string& name) const;
};

// Parses and validates the 8-byte length + JSON header. Only the header is
// read; tensor payloads stay on disk.
CheckpointManifest read_manifest(const std::string& path);

// Random access to tensor payloads. pread-based, so concurrent read_tensor
// calls on one reader are safe.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);
  CheckpointReader(CheckpointReader&&) noexcept;
  CheckpointReader& operator=(CheckpointReader&&) noexcept;
  CheckpointReader(const CheckpointReader&) = delete;
  CheckpointReader& operator=(const CheckpointReader&) = delete;
  ~CheckpointReader();

  const CheckpointManifest& manifest() const { return manifest_; }

  // Returns the file's bytes for this tensor verbatim, no numeric conversion.
  Tensor read_tensor(const std::string& name) const;

 private:
  CheckpointManifest manifest_;
  int fd_ = -1;
};

// Writes a checkpoint with tensors in lexicographic name order and a compact
// JSON header, so output bytes are deterministic for a given input set.
void write_checkpoint(const std::vector<Tensor>& tensors, const std::string& path,
                      const std::map<std::string, std::string>& metadata = {});

struct PlannedTensor {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;

  std::uint64_t num_bytes() const {
    std::uint64_t n = dtype_size(dtype);
    for (auto d : shape) n *= d;
    return n;
  }
};

// Incremental writer: the header is emitted up front from the plan, payloads
// follow one at a time in plan order. Keeps merge memory at one tensor.
// Writes go to a temp file that finish() renames into place.
class CheckpointWriter {
 public:
  CheckpointWriter(const std::string& path, std::vector<PlannedTensor> tensors,
                   const std::map<std::string, std::string>& metadata = {});
  ~CheckpointWriter();
  CheckpointWriter(const CheckpointWriter&) = delete;
  CheckpointWriter& operator=(const CheckpointWriter&) = delete;

  // Lexicographic by name; payloads must arrive in this order.
  const std::vector<PlannedTensor>& plan() const { return plan_; }

  void write_payload(const void* data, std::size_t len);
  void finish();

 private:
  std::string path_;
  std::string tmp_path_;
  std::vector<PlannedTensor> plan_;
  std::size_t next_ = 0;
  std::FILE* file_ = nullptr;
  bool finished_ = false;
};

// FNV-1a 64 over the whole file, as a 16-digit hex string. Used for change
// detection in run manifests, not for security.
std::string file_digest(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 14695981039346656037ull);

}  // namespace pad
