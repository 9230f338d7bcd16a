// Reference (serial) vs OpenMP kernels on the merge hot path and the
// Monte-Carlo simulator.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mergelaw/kernels.hpp"
#include "mergelaw/merge.hpp"
#include "mergelaw/theory_sim.hpp"

namespace {

using namespace mergelaw;

std::vector<std::vector<double>> random_deltas(std::size_t experts, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  std::vector<std::vector<double>> out(experts, std::vector<double>(n));
  for (auto& v : out) {
    for (auto& x : v) x = normal(rng);
  }
  return out;
}

template <bool Parallel>
void BM_TiesPipeline(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto source = random_deltas(4, n, 1);
  std::vector<float> base(n, 0.5f), out(n);
  for (auto _ : state) {
    auto deltas = source;
    std::vector<std::span<double>> views(deltas.begin(), deltas.end());
    for (auto& d : deltas) {
      if constexpr (Parallel) kernels::parallel::ties_trim(d, 0.2);
      else kernels::reference::ties_trim(d, 0.2);
    }
    std::vector<std::span<const double>> cviews(deltas.begin(), deltas.end());
    if constexpr (Parallel) {
      kernels::parallel::ties_elect_disjoint(views);
      kernels::parallel::combine(base, cviews, 1.0, false, out);
    } else {
      kernels::reference::ties_elect_disjoint(views);
      kernels::reference::combine(base, cviews, 1.0, false, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Dare(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = random_deltas(1, n, 2).front();
  std::vector<double> out(n);
  const auto key = dare_stream(7, "expert", "layer.weight");
  for (auto _ : state) {
    if constexpr (Parallel) kernels::parallel::dare(in, out, key, 0.2);
    else kernels::reference::dare(in, out, key, 0.2);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <Exec E>
void BM_Simulate(benchmark::State& state) {
  QuadraticWorld w;
  const Eigen::Index d = 10;
  w.gradient = Eigen::VectorXd::Ones(d);
  w.curvature = Eigen::MatrixXd::Identity(d, d);
  w.mean = Eigen::VectorXd::Zero(d);
  w.covariance = 0.04 * Eigen::MatrixXd::Identity(d, d);
  for (auto _ : state) {
    auto r = simulate(w, {1, 4, 16}, static_cast<std::size_t>(state.range(0)), 7, TaskDistribution::Gaussian, E);
    benchmark::DoNotOptimize(r.records.data());
  }
}

}  // namespace

BENCHMARK(BM_TiesPipeline<false>)->Name("ties/reference")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_TiesPipeline<true>)->Name("ties/parallel")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_Dare<false>)->Name("dare/reference")->Arg(1 << 20);
BENCHMARK(BM_Dare<true>)->Name("dare/parallel")->Arg(1 << 20);
BENCHMARK(BM_Simulate<Exec::Serial>)->Name("simulate/serial")->Arg(10000);
BENCHMARK(BM_Simulate<Exec::Parallel>)->Name("simulate/parallel")->Arg(10000);

BENCHMARK_MAIN();
