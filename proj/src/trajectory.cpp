#include "mergelaw/trajectory.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "mergelaw/error.hpp"
#include "mergelaw/rng.hpp"

namespace mergelaw {

std::size_t hamming(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw InputError("hamming: permutations differ in length");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::vector<std::size_t> candidate_shuffle(std::size_t n, std::uint64_t seed, std::size_t round,
                                           std::size_t candidate) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 engine(rng::stream_key({seed, round, candidate}));
  std::shuffle(idx.begin(), idx.end(), engine);
  return idx;
}

namespace {

std::size_t capped_factorial(std::size_t n, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n && f <= cap; ++i) f *= i;
  return f;
}

}  // namespace

std::vector<Permutation> generate_permutations(const Permutation& base, std::size_t m, std::size_t candidates,
                                               std::uint64_t seed, Exec exec) {
  if (m < 1) throw InputError("permutation count m must be >= 1");
  if (candidates < 1) throw InputError("candidate pool size must be >= 1");
  if (std::set<std::string>(base.begin(), base.end()).size() != base.size()) {
    throw InputError("base sequence labels must be unique");
  }
  if (capped_factorial(base.size(), m) < m) {
    throw InputError("m = " + std::to_string(m) + " exceeds the number of distinct permutations of " +
                     std::to_string(base.size()) + " labels");
  }

  std::vector<Permutation> chosen{base};
  if (m >= 2) chosen.emplace_back(base.rbegin(), base.rend());

  const auto pool = static_cast<std::int64_t>(candidates);
  for (std::size_t round = 2; round < m; ++round) {
    std::vector<std::size_t> score(candidates);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (std::int64_t c = 0; c < pool; ++c) {
      const auto idx = candidate_shuffle(base.size(), seed, round, static_cast<std::size_t>(c));
      Permutation p;
      p.reserve(idx.size());
      for (auto i : idx) p.push_back(base[i]);
      std::size_t worst = base.size();
      for (const auto& q : chosen) worst = std::min(worst, hamming(p, q));
      score[static_cast<std::size_t>(c)] = worst;
    }
    const auto best = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
    Permutation p;
    for (auto i : candidate_shuffle(base.size(), seed, round, best)) p.push_back(base[i]);
    chosen.push_back(std::move(p));
  }
  return chosen;
}

std::optional<double> SynergyMatrix::at(const std::string& donor, const std::string& receiver) const {
  const auto r = std::lower_bound(donors.begin(), donors.end(), donor);
  const auto c = std::lower_bound(receivers.begin(), receivers.end(), receiver);
  if (r == donors.end() || *r != donor || c == receivers.end() || *c != receiver) return std::nullopt;
  const auto i = static_cast<std::size_t>(r - donors.begin());
  const auto j = static_cast<std::size_t>(c - receivers.begin());
  if (counts[i][j] == 0) return std::nullopt;
  return sum[i][j] / static_cast<double>(counts[i][j]);
}

double SynergyMatrix::donor_strength(const std::string& donor) const {
  double s = 0.0;
  for (const auto& e : receivers) {
    if (e == donor) continue;
    if (auto v = at(donor, e)) s += *v;
  }
  return s;
}

double SynergyMatrix::receiver_susceptibility(const std::string& receiver) const {
  double s = 0.0;
  for (const auto& d : donors) {
    if (d == receiver) continue;
    if (auto v = at(d, receiver)) s += *v;
  }
  return s;
}

std::optional<double> SynergyMatrix::block_mean(std::span<const std::string> from,
                                                std::span<const std::string> to) const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& d : from) {
    for (const auto& e : to) {
      if (auto v = at(d, e)) {
        s += *v;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

SynergyMatrix synergy_matrix(std::span<const Trajectory> trajectories) {
  std::set<std::string> donor_set, receiver_set;
  bool any_step = false;
  for (const auto& tr : trajectories) {
    if (tr.donors.size() != tr.ce.size()) throw InputError("trajectory needs one CE record per step");
    if (tr.donors.empty()) continue;
    for (std::size_t t = 1; t < tr.ce.size(); ++t) {
      if (tr.ce[t].size() != tr.ce[0].size() ||
          !std::equal(tr.ce[t].begin(), tr.ce[t].end(), tr.ce[0].begin(),
                      [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw InputError("domain sets inconsistent across trajectory steps");
      }
    }
    donor_set.insert(tr.donors.begin(), tr.donors.end());
    for (const auto& [e, _] : tr.ce[0]) receiver_set.insert(e);
    any_step = any_step || tr.donors.size() >= 2;
  }
  if (!any_step) throw InputError("synergy needs at least one trajectory with T >= 2");

  SynergyMatrix s;
  s.donors.assign(donor_set.begin(), donor_set.end());
  s.receivers.assign(receiver_set.begin(), receiver_set.end());
  s.sum.assign(s.donors.size(), std::vector<double>(s.receivers.size(), 0.0));
  s.counts.assign(s.donors.size(), std::vector<std::size_t>(s.receivers.size(), 0));

  auto index_of = [](const std::vector<std::string>& v, const std::string& x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  for (const auto& tr : trajectories) {
    for (std::size_t t = 1; t < tr.donors.size(); ++t) {
      const auto row = index_of(s.donors, tr.donors[t]);
      for (const auto& [e, after] : tr.ce[t]) {
        const auto col = index_of(s.receivers, e);
        s.sum[row][col] += tr.ce[t - 1].at(e) - after;
        ++s.counts[row][col];
      }
    }
  }
  return s;
}

DispersionTable order_dispersion(const MeasurementTable& slice) {
  if (slice.methods().size() > 1) throw InputError("order dispersion expects a single-method slice");
  DispersionTable out;
  for (const auto& c : cell_statistics(slice.macro())) {
    if (c.count < 2) {
      out.warnings.push_back("skipping N=" + std::to_string(c.size) + " k=" + std::to_string(c.k) +
                             ": only one order");
      continue;
    }
    out.cells.push_back(c);
  }
  return out;
}

}  // namespace mergelaw
