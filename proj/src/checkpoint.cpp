#include "pad/checkpoint.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "pad/error.hpp"

namespace pad {

using ordered_json = nlohmann::ordered_json;

const TensorMeta& CheckpointManifest::at(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) {
    throw ValidationError("tensor \"" + name + "\" not found in " + path);
  }
  return entries[it->second];
}

namespace {

std::uint64_t read_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_le64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<unsigned char>(v & 0xFF);
    v >>= 8;
  }
}

struct Fd {
  int fd = -1;
  explicit Fd(int f) : fd(f) {}
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
};

void pread_exact(int fd, void* buf, std::size_t n, std::uint64_t offset,
                 const std::string& path) {
  unsigned char* out = static_cast<unsigned char*>(buf);
  while (n > 0) {
    const ssize_t r = ::pread(fd, out, n, static_cast<off_t>(offset));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("read error in " + path + ": " + std::strerror(errno));
    }
    if (r == 0) throw ValidationError("truncated file: " + path);
    out += r;
    offset += static_cast<std::uint64_t>(r);
    n -= static_cast<std::size_t>(r);
  }
}

CheckpointManifest parse_manifest(int fd, const std::string& path) {
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    throw IoError("cannot stat " + path + ": " + std::strerror(errno));
  }
  const std::uint64_t file_size = static_cast<std::uint64_t>(st.st_size);
  if (file_size < 8) {
    throw ValidationError("truncated file (shorter than 8-byte header length): " + path);
  }

  unsigned char len_bytes[8];
  pread_exact(fd, len_bytes, 8, 0, path);
  const std::uint64_t header_bytes = read_le64(len_bytes);
  if (header_bytes > file_size - 8) {
    throw ValidationError("truncated file: header claims " +
                          std::to_string(header_bytes) + " bytes, file has " +
                          std::to_string(file_size - 8) + " after the length field: " + path);
  }

  std::string header(header_bytes, '\0');
  if (header_bytes > 0) pread_exact(fd, header.data(), header_bytes, 8, path);

  ordered_json j;
  try {
    j = ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed header JSON in " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("header JSON is not an object: " + path);
  }

  CheckpointManifest m;
  m.path = path;
  m.header_bytes = header_bytes;
  m.data_bytes = file_size - 8 - header_bytes;

  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "__metadata__") {
      if (!it.value().is_object()) {
        throw ValidationError("__metadata__ is not an object: " + path);
      }
      for (auto mit = it.value().begin(); mit != it.value().end(); ++mit) {
        if (!mit.value().is_string()) {
          throw ValidationError("__metadata__ value for \"" + mit.key() +
                                "\" is not a string: " + path);
        }
        m.metadata[mit.key()] = mit.value().get<std::string>();
      }
      continue;
    }
    const auto& v = it.value();
    if (!v.is_object() || !v.contains("dtype") || !v.contains("shape") ||
        !v.contains("data_offsets")) {
      throw ValidationError("tensor entry \"" + it.key() + "\" malformed: " + path);
    }
    TensorMeta tm;
    tm.name = it.key();
    tm.dtype = dtype_from_name(v.at("dtype").get<std::string>());
    for (const auto& d : v.at("shape")) {
      if (!d.is_number_unsigned()) {
        throw ValidationError("tensor \"" + tm.name + "\" has a negative or non-integer dim: " + path);
      }
      tm.shape.push_back(d.get<std::uint64_t>());
    }
    const auto& off = v.at("data_offsets");
    if (!off.is_array() || off.size() != 2) {
      throw ValidationError("tensor \"" + tm.name + "\" data_offsets malformed: " + path);
    }
    tm.begin = off.at(0).get<std::uint64_t>();
    tm.end = off.at(1).get<std::uint64_t>();
    if (tm.end < tm.begin || tm.end > m.data_bytes) {
      throw ValidationError("tensor \"" + tm.name + "\" offsets out of bounds: " + path);
    }
    if (tm.end - tm.begin != tm.num_elements() * dtype_size(tm.dtype)) {
      throw ValidationError("tensor \"" + tm.name + "\" byte range does not match shape x dtype: " + path);
    }
    m.entries.push_back(std::move(tm));
  }

  std::stable_sort(m.entries.begin(), m.entries.end(),
                   [](const TensorMeta& a, const TensorMeta& b) {
                     return a.begin < b.begin || (a.begin == b.begin && a.end < b.end);
                   });
  std::uint64_t cursor = 0;
  for (const auto& e : m.entries) {
    if (e.begin != cursor) {
      throw ValidationError("tensor \"" + e.name + "\" overlaps or leaves a gap at offset " +
                            std::to_string(e.begin) + " (expected " +
                            std::to_string(cursor) + "): " + path);
    }
    cursor = e.end;
  }
  if (cursor != m.data_bytes) {
    throw ValidationError("data buffer not fully covered (" + std::to_string(cursor) +
                          " of " + std::to_string(m.data_bytes) + " bytes): " + path);
  }

  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    m.index[m.entries[i].name] = i;
  }
  return m;
}

}  // namespace

CheckpointManifest read_manifest(const std::string& path) {
  Fd fd(::open(path.c_str(), O_RDONLY));
  if (fd.fd < 0) {
    throw IoError("cannot open " + path + ": " + std::strerror(errno));
  }
  return parse_manifest(fd.fd, path);
}

CheckpointReader::CheckpointReader(const std::string& path) {
  fd_ = ::open(path.c_str(), O_RDONLY);
  if (fd_ < 0) {
    throw IoError("cannot open " + path + ": " + std::strerror(errno));
  }
  try {
    manifest_ = parse_manifest(fd_, path);
  } catch (...) {
    ::close(fd_);
    throw;
  }
}

CheckpointReader::CheckpointReader(CheckpointReader&& o) noexcept
    : manifest_(std::move(o.manifest_)), fd_(o.fd_) {
  o.fd_ = -1;
}

CheckpointReader& CheckpointReader::operator=(CheckpointReader&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    manifest_ = std::move(o.manifest_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

CheckpointReader::~CheckpointReader() {
  if (fd_ >= 0) ::close(fd_);
}

Tensor CheckpointReader::read_tensor(const std::string& name) const {
  const TensorMeta& tm = manifest_.at(name);
  Tensor t;
  t.name = tm.name;
  t.dtype = tm.dtype;
  t.shape = tm.shape;
  t.data.resize(tm.end - tm.begin);
  if (!t.data.empty()) {
    pread_exact(fd_, t.data.data(), t.data.size(),
                8 + manifest_.header_bytes + tm.begin, manifest_.path);
  }
  return t;
}

CheckpointWriter::CheckpointWriter(const std::string& path,
                                   std::vector<PlannedTensor> tensors,
                                   const std::map<std::string, std::string>& metadata)
    : path_(path), tmp_path_(path + ".tmp"), plan_(std::move(tensors)) {
  std::sort(plan_.begin(), plan_.end(),
            [](const PlannedTensor& a, const PlannedTensor& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < plan_.size(); ++i) {
    if (plan_[i].name == plan_[i - 1].name) {
      throw ValidationError("duplicate tensor name \"" + plan_[i].name + "\"");
    }
  }

  ordered_json header = ordered_json::object();
  if (!metadata.empty()) {
    ordered_json meta = ordered_json::object();
    for (const auto& [k, v] : metadata) meta[k] = v;
    header["__metadata__"] = std::move(meta);
  }
  std::uint64_t cursor = 0;
  for (const PlannedTensor& t : plan_) {
    ordered_json e = ordered_json::object();
    e["dtype"] = dtype_name(t.dtype);
    e["shape"] = t.shape;
    e["data_offsets"] = {cursor, cursor + t.num_bytes()};
    header[t.name] = std::move(e);
    cursor += t.num_bytes();
  }
  const std::string header_str = header.dump();

  file_ = std::fopen(tmp_path_.c_str(), "wb");
  if (!file_) throw IoError("cannot write " + path_ + ": " + std::strerror(errno));
  unsigned char len_bytes[8];
  write_le64(len_bytes, header_str.size());
  bool ok = std::fwrite(len_bytes, 1, 8, file_) == 8;
  ok = ok && (header_str.empty() ||
              std::fwrite(header_str.data(), 1, header_str.size(), file_) == header_str.size());
  if (!ok) {
    std::fclose(file_);
    file_ = nullptr;
    std::remove(tmp_path_.c_str());
    throw IoError("write failed for " + path_);
  }
}

CheckpointWriter::~CheckpointWriter() {
  if (!finished_) {
    if (file_) std::fclose(file_);
    std::remove(tmp_path_.c_str());
  }
}

void CheckpointWriter::write_payload(const void* data, std::size_t len) {
  if (next_ >= plan_.size()) {
    throw ValidationError("write_payload called after all planned tensors were written: " + path_);
  }
  const PlannedTensor& t = plan_[next_];
  if (len != t.num_bytes()) {
    throw ValidationError("payload for \"" + t.name + "\" is " + std::to_string(len) +
                          " bytes, plan says " + std::to_string(t.num_bytes()));
  }
  if (len > 0 && std::fwrite(data, 1, len, file_) != len) {
    throw IoError("write failed for " + path_);
  }
  ++next_;
}

void CheckpointWriter::finish() {
  if (finished_) return;
  if (next_ != plan_.size()) {
    throw ValidationError("finish called with " + std::to_string(plan_.size() - next_) +
                          " planned tensors unwritten: " + path_);
  }
  bool ok = std::fflush(file_) == 0;
  if (std::fclose(file_) != 0) ok = false;
  file_ = nullptr;
  if (!ok) {
    std::remove(tmp_path_.c_str());
    throw IoError("write failed for " + path_);
  }
  if (std::rename(tmp_path_.c_str(), path_.c_str()) != 0) {
    std::remove(tmp_path_.c_str());
    throw IoError("cannot move temp file into place for " + path_ + ": " +
                  std::strerror(errno));
  }
  finished_ = true;
}

void write_checkpoint(const std::vector<Tensor>& tensors, const std::string& path,
                      const std::map<std::string, std::string>& metadata) {
  std::vector<PlannedTensor> plan;
  plan.reserve(tensors.size());
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) {
    t.validate();
    plan.push_back({t.name, t.dtype, t.shape});
    by_name[t.name] = &t;
  }
  CheckpointWriter w(path, std::move(plan), metadata);
  for (const PlannedTensor& p : w.plan()) {
    const Tensor* t = by_name.at(p.name);
    w.write_payload(t->data.data(), t->data.size());
  }
  w.finish();
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_digest(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open " + path + ": " + std::strerror(errno));
  std::uint64_t h = 14695981039346656037ull;
  unsigned char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) {
    h = fnv1a64(buf, n, h);
  }
  const bool err = std::ferror(f) != 0;
  std::fclose(f);
  if (err) throw IoError("read error in " + path);
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

}  // namespace pad
