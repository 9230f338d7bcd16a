#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mergelaw/checkpoint.hpp"

namespace testing {

// Raw container bytes from a header string and a data payload.
inline std::vector<std::byte> container(const std::string& header, const std::vector<std::byte>& data = {}) {
  std::vector<std::byte> out(8);
  std::uint64_t len = header.size();
  std::memcpy(out.data(), &len, 8);
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline std::vector<std::byte> f32_bytes(const std::vector<float>& values) {
  std::vector<std::byte> out(values.size() * 4);
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mergelaw_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline mergelaw::Checkpoint random_checkpoint(std::uint64_t seed, std::size_t tensors = 3, float scale = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, scale);
  mergelaw::Checkpoint c;
  for (std::size_t t = 0; t < tensors; ++t) {
    const std::vector<std::size_t> shape{t + 2, 3};
    std::vector<float> v(shape[0] * shape[1]);
    for (auto& x : v) x = normal(rng);
    c.add("layer" + std::to_string(t) + ".weight", shape, std::move(v));
  }
  return c;
}

// Same keys and shapes as `like`, fresh values.
inline mergelaw::Checkpoint perturbed(const mergelaw::Checkpoint& like, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, scale);
  mergelaw::Checkpoint c;
  for (const auto& [name, t] : like.tensors()) {
    std::vector<float> v = t.values;
    for (auto& x : v) x += normal(rng);
    c.add(name, t.shape, std::move(v));
  }
  return c;
}

}  // namespace testing
