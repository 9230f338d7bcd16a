#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mergelaw/exec.hpp"

// Elementwise merge kernels. `reference` holds the straightforward serial
// versions kept as test oracles; `parallel` holds the OpenMP versions used in
// production. Every pair must agree bit-for-bit.
namespace mergelaw::kernels {

namespace reference {

void task_delta(std::span<const float> expert, std::span<const float> base, std::span<double> out);

// out[i] = keep ? in[i] / (1 - drop_rate) : 0, keep decided by the counter
// stream `key` at index i.
void dare(std::span<const double> in, std::span<double> out, std::uint64_t key, double drop_rate);

// Keeps the ceil(density * n) largest-magnitude entries, lower index first on
// ties, and zeroes the rest.
void ties_trim(std::span<double> v, double density);

// Elects sign(sum_i v_i) per position and zeroes entries of opposite sign.
void ties_elect_disjoint(std::span<const std::span<double>> vectors);

// out = base + (scale / k) * sum_i v_i, or with disjoint_mean,
// out = base + scale * sum_i v_i / #{i : v_i != 0}. Summation is in donor order.
void combine(std::span<const float> base, std::span<const std::span<const double>> vectors, double scale,
             bool disjoint_mean, std::span<float> out);

}  // namespace reference

namespace parallel {

void task_delta(std::span<const float> expert, std::span<const float> base, std::span<double> out);
void dare(std::span<const double> in, std::span<double> out, std::uint64_t key, double drop_rate);
void ties_trim(std::span<double> v, double density);
void ties_elect_disjoint(std::span<const std::span<double>> vectors);
void combine(std::span<const float> base, std::span<const std::span<const double>> vectors, double scale,
             bool disjoint_mean, std::span<float> out);

}  // namespace parallel

std::size_t ties_keep_count(std::size_t n, double density);

int max_threads();

}  // namespace mergelaw::kernels
