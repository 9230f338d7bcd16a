#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mergelaw/error.hpp"

namespace mergelaw {

enum class DType { F32, BF16 };

std::string_view dtype_name(DType dtype);
std::size_t dtype_size(DType dtype);

// Header entry of one tensor. Offsets are relative to the start of the data
// buffer (the byte after the JSON header).
struct TensorMeta {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::size_t> shape;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::size_t element_count(std::span<const std::size_t> shape);

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
};

class CheckpointError : public InputError {
 public:
  using InputError::InputError;
};

// Named dense tensors held as 32-bit floats. Keys are kept in lexicographic
// order, which is also the serialized order.
class Checkpoint {
 public:
  Checkpoint() = default;

  // Throws CheckpointError if product(shape) != values.size().
  void add(std::string name, std::vector<std::size_t> shape, std::vector<float> values);

  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  std::size_t tensor_count() const { return tensors_.size(); }
  // Total scalar parameter count N (raw count, not billions).
  std::size_t param_count() const;

 private:
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, std::string> metadata_;
};

// Parses an in-memory container: u64 LE header length, JSON header, raw data.
Checkpoint parse_checkpoint(std::span<const std::byte> bytes);
// Canonical encoding: lexicographic keys, F32 payloads, header padded with
// spaces to a multiple of 8 bytes.
std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt);

Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Header entries in data order, as they would be written by save_checkpoint.
std::vector<TensorMeta> canonical_layout(const Checkpoint& ckpt);

struct CompatibilityIssue {
  std::size_t expert_index = 0;
  std::vector<std::string> missing;         // in base, absent from expert
  std::vector<std::string> extra;           // in expert, absent from base
  std::vector<std::string> shape_mismatch;  // present in both, shapes differ
};

struct CompatibilityReport {
  std::vector<CompatibilityIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string describe() const;
};

CompatibilityReport check_compatible(const Checkpoint& base, std::span<const Checkpoint> experts);

}  // namespace mergelaw
