#include "mergelaw/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "mergelaw/error.hpp"
#include "mergelaw/rng.hpp"

namespace mergelaw::kernels {

namespace {

int sign_of(double x) { return (x > 0) - (x < 0); }

// Strict total order: larger magnitude first, lower index first on ties.
struct MagnitudeOrder {
  std::span<const double> v;
  bool operator()(std::size_t a, std::size_t b) const {
    const double ma = std::abs(v[a]);
    const double mb = std::abs(v[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  }
};

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw InputError("kernel operands have different lengths");
}

}  // namespace

std::size_t ties_keep_count(std::size_t n, double density) {
  if (!(density > 0.0 && density <= 1.0)) throw InputError("TIES density must be in (0, 1]");
  const auto keep = static_cast<std::size_t>(std::ceil(density * static_cast<double>(n)));
  return std::min(keep, n);
}

int max_threads() { return omp_get_max_threads(); }

namespace reference {

void task_delta(std::span<const float> expert, std::span<const float> base, std::span<double> out) {
  check_sizes(expert.size(), base.size());
  check_sizes(expert.size(), out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(expert[i]) - static_cast<double>(base[i]);
  }
}

void dare(std::span<const double> in, std::span<double> out, std::uint64_t key, double drop_rate) {
  check_sizes(in.size(), out.size());
  const double keep = 1.0 - drop_rate;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = rng::uniform_at(key, i) < keep ? in[i] / keep : 0.0;
  }
}

void ties_trim(std::span<double> v, double density) {
  const std::size_t keep = ties_keep_count(v.size(), density);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), MagnitudeOrder{v});
  for (std::size_t r = keep; r < order.size(); ++r) v[order[r]] = 0.0;
}

void ties_elect_disjoint(std::span<const std::span<double>> vectors) {
  if (vectors.empty()) return;
  const std::size_t n = vectors[0].size();
  for (const auto& v : vectors) check_sizes(v.size(), n);
  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v[j];
    const int elected = sign_of(sum);
    for (const auto& v : vectors) {
      if (v[j] != 0.0 && sign_of(v[j]) != elected) v[j] = 0.0;
    }
  }
}

void combine(std::span<const float> base, std::span<const std::span<const double>> vectors, double scale,
             bool disjoint_mean, std::span<float> out) {
  check_sizes(base.size(), out.size());
  for (const auto& v : vectors) check_sizes(v.size(), base.size());
  const auto k = static_cast<double>(vectors.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    double acc = 0.0;
    std::size_t nonzero = 0;
    for (const auto& v : vectors) {
      acc += v[j];
      nonzero += v[j] != 0.0;
    }
    double offset = 0.0;
    if (disjoint_mean) {
      offset = nonzero ? acc / static_cast<double>(nonzero) * scale : 0.0;
    } else {
      offset = acc / k * scale;
    }
    out[j] = static_cast<float>(static_cast<double>(base[j]) + offset);
  }
}

}  // namespace reference

namespace parallel {

void task_delta(std::span<const float> expert, std::span<const float> base, std::span<double> out) {
  check_sizes(expert.size(), base.size());
  check_sizes(expert.size(), out.size());
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for simd schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = static_cast<double>(expert[i]) - static_cast<double>(base[i]);
  }
}

void dare(std::span<const double> in, std::span<double> out, std::uint64_t key, double drop_rate) {
  check_sizes(in.size(), out.size());
  const double keep = 1.0 - drop_rate;
  const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = rng::uniform_at(key, static_cast<std::uint64_t>(i)) < keep ? in[i] / keep : 0.0;
  }
}

void ties_trim(std::span<double> v, double density) {
  const std::size_t keep = ties_keep_count(v.size(), density);
  if (keep == v.size()) return;
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto nth = order.begin() + static_cast<std::ptrdiff_t>(keep);
  std::nth_element(order.begin(), nth, order.end(), MagnitudeOrder{v});
  const auto n = static_cast<std::int64_t>(order.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = static_cast<std::int64_t>(keep); r < n; ++r) v[order[r]] = 0.0;
}

void ties_elect_disjoint(std::span<const std::span<double>> vectors) {
  if (vectors.empty()) return;
  const std::size_t n = vectors[0].size();
  for (const auto& v : vectors) check_sizes(v.size(), n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < count; ++j) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v[j];
    const int elected = sign_of(sum);
    for (const auto& v : vectors) {
      if (v[j] != 0.0 && sign_of(v[j]) != elected) v[j] = 0.0;
    }
  }
}

void combine(std::span<const float> base, std::span<const std::span<const double>> vectors, double scale,
             bool disjoint_mean, std::span<float> out) {
  check_sizes(base.size(), out.size());
  for (const auto& v : vectors) check_sizes(v.size(), base.size());
  const auto k = static_cast<double>(vectors.size());
  const auto n = static_cast<std::int64_t>(base.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    double acc = 0.0;
    std::size_t nonzero = 0;
    for (const auto& v : vectors) {
      acc += v[j];
      nonzero += v[j] != 0.0;
    }
    double offset = 0.0;
    if (disjoint_mean) {
      offset = nonzero ? acc / static_cast<double>(nonzero) * scale : 0.0;
    } else {
      offset = acc / k * scale;
    }
    out[j] = static_cast<float>(static_cast<double>(base[j]) + offset);
  }
}

}  // namespace parallel

}  // namespace mergelaw::kernels
