#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mergelaw/exec.hpp"
#include "mergelaw/measurements.hpp"

namespace mergelaw {

using Permutation = std::vector<std::string>;

// Number of positions where a and b differ. Throws InputError on length
// mismatch.
std::size_t hamming(std::span<const std::string> a, std::span<const std::string> b);

// Index permutation of candidate `candidate` in selection round `round`,
// drawn from its own RNG stream. Exposed so callers can re-score the exact
// candidate pools a selection saw.
std::vector<std::size_t> candidate_shuffle(std::size_t n, std::uint64_t seed, std::size_t round,
                                           std::size_t candidate);

// Greedy max-min diverse orders: base, reverse(base), then for each further
// slot the candidate shuffle maximizing the minimum Hamming distance to the
// permutations chosen so far (earliest candidate wins ties).
std::vector<Permutation> generate_permutations(const Permutation& base, std::size_t m, std::size_t candidates = 1000,
                                               std::uint64_t seed = 0, Exec exec = Exec::Parallel);

// Incremental merge: after step t the merge holds donors[0..t]; ce[t] maps
// evaluation domain -> CE of that merge.
struct Trajectory {
  std::vector<std::string> donors;
  std::vector<std::map<std::string, double>> ce;
};

struct SynergyMatrix {
  std::vector<std::string> donors;     // row labels, sorted
  std::vector<std::string> receivers;  // column labels, sorted
  std::vector<std::vector<double>> sum;
  std::vector<std::vector<std::size_t>> counts;

  // Mean gain for donor -> receiver; nullopt if never observed.
  std::optional<double> at(const std::string& donor, const std::string& receiver) const;
  // Sum over observed receivers != donor.
  double donor_strength(const std::string& donor) const;
  // Sum over observed donors != receiver.
  double receiver_susceptibility(const std::string& receiver) const;
  // Mean of observed S[d -> e] for d in from, e in to (diagonal included).
  std::optional<double> block_mean(std::span<const std::string> from, std::span<const std::string> to) const;
};

// Accumulates L_e(t-1) - L_e(t) into cell (donor_t, e) for t >= 2; positive
// means adding the donor lowered the receiver's CE.
SynergyMatrix synergy_matrix(std::span<const Trajectory> trajectories);

struct DispersionTable {
  std::vector<CellStats> cells;
  std::vector<std::string> warnings;
};

// Across-order statistics of macro CE per (N, k). Cells with a single order
// are skipped with a warning.
DispersionTable order_dispersion(const MeasurementTable& slice);

}  // namespace mergelaw
