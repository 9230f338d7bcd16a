#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mergelaw/error.hpp"
#include "mergelaw/trajectory.hpp"

using namespace mergelaw;
using doctest::Approx;

namespace {

Permutation labels(int n) {
  Permutation p;
  for (int i = 1; i <= n; ++i) p.push_back(std::to_string(i));
  return p;
}

bool is_rearrangement(const Permutation& p, const Permutation& base) {
  auto a = p, b = base;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

// Re-runs the selection with a separate scorer over the same candidate draws.
std::vector<Permutation> brute_force_selection(const Permutation& base, std::size_t m, std::size_t candidates,
                                               std::uint64_t seed) {
  std::vector<Permutation> out{base, Permutation(base.rbegin(), base.rend())};
  for (std::size_t round = 2; round < m; ++round) {
    long best_score = -1;
    Permutation best;
    for (std::size_t c = 0; c < candidates; ++c) {
      Permutation p;
      for (auto i : candidate_shuffle(base.size(), seed, round, c)) p.push_back(base[i]);
      long worst = std::numeric_limits<long>::max();
      for (const auto& q : out) {
        long d = 0;
        for (std::size_t j = 0; j < p.size(); ++j) d += p[j] == q[j] ? 0 : 1;
        worst = std::min(worst, d);
      }
      if (worst > best_score) {
        best_score = worst;
        best = p;
      }
    }
    out.push_back(best);
  }
  out.resize(std::min(m, out.size()));
  return out;
}

Trajectory make(std::vector<std::string> donors, std::vector<std::map<std::string, double>> ce) {
  return Trajectory{std::move(donors), std::move(ce)};
}

}  // namespace

TEST_CASE("hamming") {
  const auto base = labels(9);
  const Permutation rev(base.rbegin(), base.rend());
  CHECK(hamming(base, base) == 0);
  CHECK(hamming(Permutation{"1", "2", "3"}, Permutation{"3", "2", "1"}) == 2);
  CHECK(hamming(base, rev) == 8);
  CHECK_THROWS_AS(hamming(base, labels(8)), InputError);
}

TEST_CASE("first two orders are base and reverse") {
  const auto base = labels(9);
  const auto one = generate_permutations(base, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == base);
  const auto two = generate_permutations(base, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[1] == Permutation(base.rbegin(), base.rend()));
}

TEST_CASE("greedy max-min selection matches a brute-force scorer") {
  const auto base = labels(9);
  for (std::uint64_t seed : {0u, 3u, 17u}) {
    for (std::size_t m = 3; m <= 6; ++m) {
      for (std::size_t pool : {1u, 10u, 200u}) {
        const auto got = generate_permutations(base, m, pool, seed);
        CHECK(got == brute_force_selection(base, m, pool, seed));
      }
    }
  }
}

TEST_CASE("selection is independent of execution mode") {
  const auto base = labels(7);
  CHECK(generate_permutations(base, 8, 300, 5, Exec::Serial) == generate_permutations(base, 8, 300, 5, Exec::Parallel));
}

TEST_CASE("every returned order is a valid rearrangement") {
  std::mt19937_64 rng(1);
  for (int n = 1; n <= 10; ++n) {
    const auto base = labels(n);
    const std::size_t m = std::min<std::size_t>(12, n <= 3 ? (n == 1 ? 1 : n == 2 ? 2 : 6) : 12);
    const auto perms = generate_permutations(base, m, 50, rng());
    CHECK(perms.size() == m);
    CHECK(perms.front() == base);
    for (const auto& p : perms) CHECK(is_rearrangement(p, base));
  }
}

TEST_CASE("permutation input errors") {
  CHECK_THROWS_AS(generate_permutations(labels(3), 7), InputError);
  CHECK_THROWS_AS(generate_permutations(labels(3), 0), InputError);
  CHECK_THROWS_AS(generate_permutations(labels(3), 2, 0), InputError);
  CHECK_THROWS_AS(generate_permutations(Permutation{"a", "a", "b"}, 2), InputError);
}

TEST_CASE("synergy from one two-step trajectory") {
  const auto s = synergy_matrix(std::vector<Trajectory>{make({"a", "b"}, {{{"x", 0.50}}, {{"x", 0.45}}})});
  CHECK(s.at("b", "x").value() == Approx(0.05));
  CHECK(s.counts[1][0] == 1);
  CHECK_FALSE(s.at("a", "x").has_value());
}

TEST_CASE("a donor that raises CE gets a negative entry") {
  const auto s = synergy_matrix(std::vector<Trajectory>{make({"a", "b"}, {{{"x", 0.50}}, {{"x", 0.53}}})});
  CHECK(s.at("b", "x").value() == Approx(-0.03));
}

TEST_CASE("synergy input errors") {
  CHECK_THROWS_AS(synergy_matrix(std::vector<Trajectory>{make({"a"}, {{{"x", 0.5}}})}), InputError);
  CHECK_THROWS_AS(
      synergy_matrix(std::vector<Trajectory>{make({"a", "b"}, {{{"x", 0.5}}, {{"y", 0.4}}})}), InputError);
  CHECK_THROWS_AS(synergy_matrix(std::vector<Trajectory>{make({"a", "b"}, {{{"x", 0.5}}})}), InputError);
}

TEST_CASE("planted block structure is recovered") {
  const std::vector<std::string> science{"biology", "chemistry", "physics"};
  const std::vector<std::string> math{"algebra", "analysis", "discrete", "geometry", "number_theory", "code"};
  std::vector<std::string> all = science;
  all.insert(all.end(), math.begin(), math.end());
  auto is_science = [&](const std::string& d) { return std::find(science.begin(), science.end(), d) != science.end(); };
  auto planted = [&](const std::string& d, const std::string& e) {
    if (is_science(d) && is_science(e)) return 0.07;
    if (is_science(d) != is_science(e)) return -0.01;
    return 0.02;
  };

  const double sigma = 0.01;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Trajectory> trajectories;
  for (const auto& order : generate_permutations(all, 40, 200, 2)) {
    Trajectory tr;
    tr.donors = order;
    std::map<std::string, double> ce;
    for (const auto& e : all) ce[e] = 1.0;
    tr.ce.push_back(ce);
    for (std::size_t t = 1; t < order.size(); ++t) {
      for (const auto& e : all) ce[e] -= planted(order[t], e) + noise(rng);
      tr.ce.push_back(ce);
    }
    trajectories.push_back(std::move(tr));
  }
  const auto s = synergy_matrix(trajectories);

  auto check_block = [&](const std::vector<std::string>& from, const std::vector<std::string>& to, double truth) {
    // SE of a mean of cell means with per-cell noise sigma^2 / count
    double var = 0.0;
    std::size_t cells = 0;
    for (const auto& d : from) {
      for (const auto& e : to) {
        const auto i = std::lower_bound(s.donors.begin(), s.donors.end(), d) - s.donors.begin();
        const auto j = std::lower_bound(s.receivers.begin(), s.receivers.end(), e) - s.receivers.begin();
        if (s.counts[i][j] == 0) continue;
        var += sigma * sigma / double(s.counts[i][j]);
        ++cells;
      }
    }
    const double se = std::sqrt(var) / double(cells);
    const auto got = s.block_mean(from, to);
    REQUIRE(got.has_value());
    CHECK(std::abs(*got - truth) < 2 * se);
  };
  check_block(science, science, 0.07);
  check_block(science, math, -0.01);
  check_block(math, science, -0.01);
  check_block(math, math, 0.02);

  // strength excludes the diagonal: 2 science receivers at 0.07, 6 math at -0.01
  CHECK(s.donor_strength("biology") == Approx(2 * 0.07 - 6 * 0.01).epsilon(0.1));
  CHECK(s.receiver_susceptibility("physics") == Approx(2 * 0.07 - 6 * 0.01).epsilon(0.1));
}

TEST_CASE("synergy is linear in the CE values") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.3, 0.9);
  std::vector<Trajectory> trs, scaled;
  for (const auto& order : generate_permutations({"a", "b", "c", "d"}, 6, 20, 1)) {
    Trajectory t{order, {}}, s{order, {}};
    for (std::size_t step = 0; step < order.size(); ++step) {
      std::map<std::string, double> ce, ce2;
      for (const auto* e : {"a", "b", "c", "d"}) {
        ce[e] = u(rng);
        ce2[e] = 2.5 * ce[e];
      }
      t.ce.push_back(ce);
      s.ce.push_back(ce2);
    }
    trs.push_back(t);
    scaled.push_back(s);
  }
  const auto m1 = synergy_matrix(trs), m2 = synergy_matrix(scaled);
  for (const auto& d : m1.donors) {
    for (const auto& e : m1.receivers) {
      const auto a = m1.at(d, e), b = m2.at(d, e);
      CHECK(a.has_value() == b.has_value());
      if (a) CHECK(*b == Approx(2.5 * *a).epsilon(1e-12));
    }
  }
}

TEST_CASE("order dispersion") {
  SUBCASE("two orders") {
    MeasurementTable t;
    t.add({"average", 3, 2, "x", "a-b", 0.4});
    t.add({"average", 3, 2, "x", "b-a", 0.6});
    const auto d = order_dispersion(t);
    REQUIRE(d.cells.size() == 1);
    CHECK(d.cells[0].mean == Approx(0.5));
    CHECK(d.cells[0].stddev == Approx(0.141421).epsilon(1e-5));
    CHECK(d.cells[0].range == Approx(0.2));
    CHECK(d.cells[0].cv == Approx(0.282843).epsilon(1e-5));
  }
  SUBCASE("identical orders") {
    MeasurementTable t;
    for (const auto* g : {"a", "b", "c"}) t.add({"average", 3, 1, "x", g, 0.7});
    const auto d = order_dispersion(t);
    CHECK(d.cells[0].stddev == 0.0);
    CHECK(d.cells[0].range == 0.0);
    CHECK(d.cells[0].cv == 0.0);
  }
  SUBCASE("table built to a target std and range") {
    // extremes +-r/2, inner points +-e and 0: SS = r^2/2 + 2 e^2 over n - 1 = 4
    const double s = 0.0313, r = 0.0865, m = 0.9;
    const double e = std::sqrt((4 * s * s - r * r / 2) / 2);
    MeasurementTable t;
    const double offsets[] = {-r / 2, r / 2, -e, e, 0.0};
    for (int i = 0; i < 5; ++i) t.add({"dare", 32, 1, "x", "o" + std::to_string(i), m + offsets[i]});
    const auto d = order_dispersion(t);
    REQUIRE(d.cells.size() == 1);
    CHECK(d.cells[0].stddev == Approx(s).epsilon(1e-12));
    CHECK(d.cells[0].range == Approx(r).epsilon(1e-12));
  }
  SUBCASE("macro CE first, lonely cells skipped") {
    MeasurementTable t;
    t.add({"average", 3, 2, "x", "a-b", 0.4});
    t.add({"average", 3, 2, "y", "a-b", 0.6});
    t.add({"average", 3, 2, "x", "b-a", 0.8});
    t.add({"average", 3, 2, "y", "b-a", 1.0});
    t.add({"average", 3, 1, "x", "a", 0.9});
    const auto d = order_dispersion(t);
    REQUIRE(d.cells.size() == 1);
    CHECK(d.cells[0].mean == Approx(0.7));
    CHECK(d.cells[0].range == Approx(0.4));
    CHECK(d.warnings.size() == 1);
  }
  SUBCASE("range bounds std") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.6, 0.05);
    MeasurementTable t;
    for (int k = 1; k <= 6; ++k) {
      for (int g = 0; g < 2 + k; ++g) t.add({"average", 1.5, k, "x", "o" + std::to_string(g), noise(rng)});
    }
    for (const auto& c : order_dispersion(t).cells) {
      CHECK(c.stddev <= c.range);
      CHECK(c.range >= 0.0);
    }
  }
}
