#include "mergelaw/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace mergelaw {

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts need byte swapping");

using json = nlohmann::json;

namespace {

constexpr const char* kMetadataKey = "__metadata__";

DType parse_dtype(const std::string& tag, const std::string& tensor) {
  if (tag == "F32") return DType::F32;
  if (tag == "BF16") return DType::BF16;
  throw CheckpointError("tensor '" + tensor + "': unsupported dtype '" + tag + "'");
}

float bf16_to_float(std::uint16_t raw) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(raw) << 16);
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

std::string_view dtype_name(DType dtype) {
  return dtype == DType::F32 ? "F32" : "BF16";
}

std::size_t dtype_size(DType dtype) {
  return dtype == DType::F32 ? 4 : 2;
}

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

void Checkpoint::add(std::string name, std::vector<std::size_t> shape, std::vector<float> values) {
  if (element_count(shape) != values.size()) {
    throw CheckpointError("tensor '" + name + "': shape " + shape_string(shape) + " holds " +
                          std::to_string(element_count(shape)) + " elements but " +
                          std::to_string(values.size()) + " values were given");
  }
  if (name == kMetadataKey) throw CheckpointError("tensor name '__metadata__' is reserved");
  tensors_.insert_or_assign(std::move(name), Tensor{std::move(shape), std::move(values)});
}

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CheckpointError("no tensor named '" + name + "'");
  return it->second;
}

Tensor& Checkpoint::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CheckpointError("no tensor named '" + name + "'");
  return it->second;
}

std::size_t Checkpoint::param_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += element_count(t.shape);
  return n;
}

Checkpoint parse_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 8) throw CheckpointError("malformed header length: file shorter than 8 bytes");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data(), sizeof header_len);
  if (header_len > bytes.size() - 8) {
    throw CheckpointError("malformed header length: header of " + std::to_string(header_len) +
                          " bytes exceeds file size");
  }

  const auto* header_begin = reinterpret_cast<const char*>(bytes.data() + 8);
  json header;
  try {
    header = json::parse(header_begin, header_begin + header_len);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("header not valid JSON: ") + e.what());
  }
  if (!header.is_object()) throw CheckpointError("header not valid JSON: expected an object");

  const std::span<const std::byte> data = bytes.subspan(8 + header_len);

  Checkpoint ckpt;
  std::vector<TensorMeta> metas;
  for (const auto& [name, entry] : header.items()) {
    if (name == kMetadataKey) {
      if (!entry.is_object()) throw CheckpointError("__metadata__ must be a string map");
      for (const auto& [mk, mv] : entry.items()) {
        if (!mv.is_string()) throw CheckpointError("__metadata__ value for '" + mk + "' is not a string");
        ckpt.metadata()[mk] = mv.get<std::string>();
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
        !entry.contains("data_offsets")) {
      throw CheckpointError("tensor '" + name + "': entry needs dtype, shape and data_offsets");
    }
    TensorMeta meta;
    meta.name = name;
    if (!entry["dtype"].is_string()) throw CheckpointError("tensor '" + name + "': dtype is not a string");
    meta.dtype = parse_dtype(entry["dtype"].get<std::string>(), name);
    const auto& shape = entry["shape"];
    if (!shape.is_array()) throw CheckpointError("tensor '" + name + "': shape is not an array");
    for (const auto& d : shape) {
      if (!d.is_number_unsigned() && !(d.is_number_integer() && d.get<std::int64_t>() >= 0)) {
        throw CheckpointError("tensor '" + name + "': shape extents must be non-negative integers");
      }
      meta.shape.push_back(d.get<std::size_t>());
    }
    const auto& offsets = entry["data_offsets"];
    if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
        !offsets[1].is_number_unsigned()) {
      throw CheckpointError("tensor '" + name + "': data_offsets must be [begin, end]");
    }
    meta.begin = offsets[0].get<std::size_t>();
    meta.end = offsets[1].get<std::size_t>();
    if (meta.end < meta.begin) throw CheckpointError("tensor '" + name + "': data_offsets end < begin");
    const std::size_t expected = element_count(meta.shape) * dtype_size(meta.dtype);
    if (meta.end - meta.begin != expected) {
      throw CheckpointError("tensor '" + name + "': size mismatch: shape " + shape_string(meta.shape) +
                            " needs " + std::to_string(expected) + " bytes, data_offsets span " +
                            std::to_string(meta.end - meta.begin));
    }
    if (meta.end > data.size()) {
      throw CheckpointError("tensor '" + name + "': data_offsets out of bounds (end " +
                            std::to_string(meta.end) + " > data size " + std::to_string(data.size()) + ")");
    }
    metas.push_back(std::move(meta));
  }

  std::sort(metas.begin(), metas.end(), [](const TensorMeta& a, const TensorMeta& b) {
    return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
  });
  std::size_t cursor = 0;
  for (const auto& m : metas) {
    if (m.begin < cursor) throw CheckpointError("tensor '" + m.name + "': overlapping byte ranges");
    if (m.begin > cursor) throw CheckpointError("tensor '" + m.name + "': byte ranges are not contiguous");
    cursor = m.end;
  }

  for (auto& m : metas) {
    const std::size_t n = element_count(m.shape);
    std::vector<float> values(n);
    const std::byte* src = data.data() + m.begin;
    if (m.dtype == DType::F32) {
      std::memcpy(values.data(), src, n * sizeof(float));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t raw = 0;
        std::memcpy(&raw, src + 2 * i, 2);
        values[i] = bf16_to_float(raw);
      }
    }
    ckpt.add(std::move(m.name), std::move(m.shape), std::move(values));
  }
  return ckpt;
}

std::vector<TensorMeta> canonical_layout(const Checkpoint& ckpt) {
  std::vector<TensorMeta> layout;
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors()) {
    const std::size_t bytes = t.values.size() * sizeof(float);
    layout.push_back(TensorMeta{name, DType::F32, t.shape, offset, offset + bytes});
    offset += bytes;
  }
  return layout;
}

std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt) {
  json header = json::object();
  const auto layout = canonical_layout(ckpt);
  for (const auto& m : layout) {
    header[m.name] = {{"dtype", dtype_name(m.dtype)},
                      {"shape", m.shape},
                      {"data_offsets", {m.begin, m.end}}};
  }
  if (!ckpt.metadata().empty()) header[kMetadataKey] = ckpt.metadata();

  std::string text = header.dump();
  text.append((8 - text.size() % 8) % 8, ' ');

  const std::size_t data_size = layout.empty() ? 0 : layout.back().end;
  std::vector<std::byte> out(8 + text.size() + data_size);
  const std::uint64_t header_len = text.size();
  std::memcpy(out.data(), &header_len, 8);
  std::memcpy(out.data() + 8, text.data(), text.size());
  std::byte* data = out.data() + 8 + text.size();
  for (const auto& m : layout) {
    const auto& values = ckpt.at(m.name).values;
    std::memcpy(data + m.begin, values.data(), values.size() * sizeof(float));
  }
  return out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(std::as_bytes(std::span<const char>(raw)));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

std::string CompatibilityReport::describe() const {
  if (ok()) return "OK";
  std::ostringstream os;
  for (const auto& issue : issues) {
    os << "expert " << issue.expert_index << ":";
    for (const auto& k : issue.missing) os << " missing '" << k << "'";
    for (const auto& k : issue.extra) os << " extra '" << k << "'";
    for (const auto& k : issue.shape_mismatch) os << " shape mismatch on '" << k << "'";
    os << "\n";
  }
  return os.str();
}

CompatibilityReport check_compatible(const Checkpoint& base, std::span<const Checkpoint> experts) {
  CompatibilityReport report;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    CompatibilityIssue issue;
    issue.expert_index = i;
    const auto& et = experts[i].tensors();
    for (const auto& [name, t] : base.tensors()) {
      auto it = et.find(name);
      if (it == et.end()) {
        issue.missing.push_back(name);
      } else if (it->second.shape != t.shape) {
        issue.shape_mismatch.push_back(name);
      }
    }
    for (const auto& [name, _] : et) {
      if (!base.contains(name)) issue.extra.push_back(name);
    }
    if (!issue.missing.empty() || !issue.extra.empty() || !issue.shape_mismatch.empty()) {
      report.issues.push_back(std::move(issue));
    }
  }
  return report;
}

}  // namespace mergelaw
