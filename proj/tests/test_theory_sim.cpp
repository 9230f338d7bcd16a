#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "mergelaw/error.hpp"
#include "mergelaw/theory_sim.hpp"

using namespace mergelaw;
using doctest::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

QuadraticWorld isotropic(Eigen::Index dim, double sigma2, double g, double mu, double c = 1.0) {
  QuadraticWorld w;
  w.base_loss = 1.0;
  w.gradient = VectorXd::Constant(dim, g);
  w.curvature = MatrixXd::Identity(dim, dim);
  w.mean = VectorXd::Constant(dim, mu);
  w.covariance = sigma2 * MatrixXd::Identity(dim, dim);
  w.scale = c;
  return w;
}

bool same(const SimResult& a, const SimResult& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.k != y.k || x.mean != y.mean || x.variance != y.variance || x.se_mean != y.se_mean ||
        x.se_variance != y.se_variance || x.trials != y.trials) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("closed-form floor") {
  auto w = isotropic(3, 0.1, 0.5, 0.0);
  CHECK(closed_form_floor(w) == 1.0);

  QuadraticWorld s;
  s.base_loss = 0;
  s.gradient = VectorXd::Constant(1, 1);
  s.curvature = MatrixXd::Constant(1, 1, 2);
  s.mean = VectorXd::Constant(1, 3);
  s.covariance = MatrixXd::Zero(1, 1);
  CHECK(closed_form_floor(s) == 12.0);

  QuadraticWorld t;
  t.base_loss = 0.25;
  t.gradient = VectorXd{{1.0, 0.0}};
  t.curvature = MatrixXd::Identity(2, 2);
  t.mean = VectorXd{{1.0, 1.0}};
  t.covariance = MatrixXd::Zero(2, 2);
  t.scale = 0.5;
  CHECK(closed_form_floor(t) == Approx(0.25 + 0.75));
}

TEST_CASE("closed-form tail") {
  CHECK(closed_form_tail(isotropic(10, 0.04, 0, 0)) == Approx(0.2).epsilon(1e-14));
  CHECK(closed_form_tail(isotropic(10, 0.0, 0, 0)) == 0.0);
  QuadraticWorld w;
  w.gradient = VectorXd::Zero(2);
  w.mean = VectorXd::Zero(2);
  w.curvature = VectorXd{{1.0, 2.0}}.asDiagonal();
  w.covariance = VectorXd{{3.0, 4.0}}.asDiagonal();
  w.scale = 2.0;
  CHECK(closed_form_tail(w) == Approx(22.0));
}

TEST_CASE("closed-form Gaussian variance") {
  const auto w = isotropic(10, 0.04, 1.0, 0.0);
  for (int k : {1, 2, 4, 8}) {
    CHECK(closed_form_variance_gaussian(w, k) == Approx(0.4 / k + 0.008 / (k * k)).epsilon(1e-12));
  }
  auto degenerate = isotropic(10, 0.04, -0.5, 0.5);  // g = -c H mu
  for (int k : {1, 3, 9}) {
    CHECK(closed_form_variance_gaussian(degenerate, k) == Approx(0.008 / (k * k)).epsilon(1e-12));
  }
  CHECK(closed_form_variance_gaussian(isotropic(4, 0.0, 1.0, 0.3), 2) == 0.0);
  CHECK_THROWS_AS(closed_form_variance_gaussian(w, 0), InputError);
}

TEST_CASE("simulation without noise sits on the floor") {
  const auto w = isotropic(4, 0.0, 0.7, 0.2, 0.8);
  const auto r = simulate(w, {1, 3, 7}, 50, 1);
  for (const auto& rec : r.records) {
    CHECK(rec.mean == Approx(closed_form_floor(w)).epsilon(1e-12));
    CHECK(rec.variance == Approx(0.0).epsilon(1e-20));
  }
}

TEST_CASE("simulated mean matches floor + tail / k") {
  const auto w = isotropic(10, 0.04, 1.0, 0.1, 0.9);
  const double floor = closed_form_floor(w), tail = closed_form_tail(w);
  for (auto dist : {TaskDistribution::Gaussian, TaskDistribution::BoundedUniform}) {
    const auto r = simulate(w, {1, 2, 4, 8}, 20000, 3, dist);
    for (const auto& rec : r.records) {
      CHECK(rec.trials == 20000);
      CHECK(std::abs(rec.mean - (floor + tail / rec.k)) < 3 * rec.se_mean);
    }
  }
}

TEST_CASE("simulated variance matches the Gaussian oracle") {
  const auto w = isotropic(6, 0.05, 0.3, 0.2);
  const auto r = simulate(w, {1, 2, 4, 8}, 20000, 4);
  for (const auto& rec : r.records) {
    CHECK(std::abs(rec.variance - closed_form_variance_gaussian(w, rec.k)) < 3 * rec.se_variance);
  }
}

TEST_CASE("simulation is deterministic for any thread count") {
  const auto w = isotropic(5, 0.04, 1.0, 0.0);
  const std::vector<int> ks{1, 2, 5};
  const auto serial = simulate(w, ks, 3000, 9, TaskDistribution::Gaussian, Exec::Serial);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 3, 4}) {
    omp_set_num_threads(threads);
    CHECK(same(serial, simulate(w, ks, 3000, 9, TaskDistribution::Gaussian, Exec::Parallel)));
  }
  omp_set_num_threads(saved);
  CHECK(same(serial, simulate(w, ks, 3000, 9, TaskDistribution::Gaussian, Exec::Serial)));
  CHECK_FALSE(same(serial, simulate(w, ks, 3000, 10, TaskDistribution::Gaussian, Exec::Serial)));
}

TEST_CASE("slope check") {
  std::vector<double> ks{1, 2, 4, 8, 16}, inv, inv2;
  for (double k : ks) {
    inv.push_back(0.3 / k);
    inv2.push_back(0.3 / (k * k));
  }
  CHECK(log_log_slope(ks, inv) == Approx(-1.0).epsilon(1e-9));
  CHECK(log_log_slope(ks, inv2) == Approx(-2.0).epsilon(1e-9));
  CHECK_THROWS_AS(log_log_slope(ks, std::vector<double>{1, 1, 0, 1, 1}), NumericalError);
  CHECK_THROWS_AS(log_log_slope({1, 2}, {1, 0.5}), InputError);
}

TEST_CASE("covariance factor handles singular PSD matrices") {
  MatrixXd s(3, 3);
  s << 2, 1, 0, 1, 2, 0, 0, 0, 0;
  const auto f = covariance_factor(s);
  CHECK((f * f.transpose() - s).cwiseAbs().maxCoeff() < 1e-12);

  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(covariance_factor(bad), NumericalError);
  auto w = isotropic(2, 0.1, 0, 0);
  w.covariance = bad;
  CHECK_THROWS_AS(simulate(w, {1}, 10, 0), NumericalError);
}

TEST_CASE("world validation and JSON config") {
  auto w = isotropic(3, 0.1, 0, 0);
  w.curvature(0, 1) = 0.3;
  CHECK_THROWS_AS(w.validate(), InputError);

  const auto j = nlohmann::json::parse(R"({
    "dim": 3, "L0": 0.5, "g": "ones", "H": "identity", "mu": [0.1, 0.2, 0.3],
    "Sigma": {"diagonal": [0.01, 0.02, 0.03]}, "c": 0.8})");
  const auto parsed = world_from_json(j);
  CHECK(parsed.dim() == 3);
  CHECK(parsed.base_loss == 0.5);
  CHECK(parsed.covariance(2, 2) == 0.03);
  CHECK(parsed.covariance(0, 1) == 0.0);
  CHECK(parsed.mean(1) == 0.2);
  CHECK(parsed.scale == 0.8);

  const auto scaled = world_from_json(nlohmann::json::parse(
      R"({"dim": 2, "g": 0.0, "H": [[2, 0], [0, 1]], "mu": "zeros", "Sigma": {"identity": 0.04}})"));
  CHECK(scaled.covariance(1, 1) == 0.04);
  CHECK(scaled.curvature(0, 0) == 2.0);
  CHECK(scaled.scale == 1.0);

  CHECK_THROWS_AS(world_from_json(nlohmann::json::parse(R"({"dim": 2, "g": [1], "H": "identity",
      "mu": "zeros", "Sigma": "identity"})")), InputError);
  CHECK_THROWS_AS(world_from_json(nlohmann::json::parse(R"({"dim": 2})")), InputError);
}

TEST_CASE("simulate input errors") {
  const auto w = isotropic(2, 0.1, 0, 0);
  CHECK_THROWS_AS(simulate(w, {}, 10, 0), InputError);
  CHECK_THROWS_AS(simulate(w, {0}, 10, 0), InputError);
  CHECK_THROWS_AS(simulate(w, {1}, 1, 0), InputError);
}
