#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>

#include "mergelaw/error.hpp"
#include "mergelaw/fitting.hpp"
#include "reference_fits.hpp"

using namespace mergelaw;
using doctest::Approx;

namespace {

std::vector<CurvePoint> curve_points(const CurveParams& p, int k_max,
                                     const std::optional<BoundedTermParams>& extra = std::nullopt) {
  std::vector<CurvePoint> pts;
  for (int k = 1; k <= k_max; ++k) pts.push_back({double(k), eval_curve(p, k, extra)});
  return pts;
}

std::vector<JointPoint> joint_points(const JointParams& p, std::span<const double> sizes = testing::kSizes,
                                     int k_max = 9) {
  std::vector<JointPoint> pts;
  for (double n : sizes) {
    for (int k = 1; k <= k_max; ++k) pts.push_back({n, double(k), eval_joint(p, n, k)});
  }
  return pts;
}

const JointParams& law(std::string_view domain) {
  for (const auto& d : testing::kAverageLaws) {
    if (d.domain == domain) return d.params;
  }
  throw std::out_of_range("domain");
}

}  // namespace

TEST_CASE("r_squared") {
  const std::vector<double> y{1, 2, 3};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{2, 2, 2}) == 0.0);
  CHECK(r_squared(y, std::vector<double>{1, 2, 4}) == Approx(0.5));
  CHECK_THROWS_AS(r_squared(std::vector<double>{1, 1}, std::vector<double>{1, 1}), NumericalError);
  CHECK_THROWS_AS(r_squared(y, std::vector<double>{1, 2}), InputError);
}

TEST_CASE("fit_curve on exact data") {
  const CurveParams truth{0.5, 0.2, 0.5};
  const auto fit = fit_curve(curve_points(truth, 9));
  CHECK(fit.params.floor == Approx(truth.floor).epsilon(1e-6));
  CHECK(fit.params.amplitude == Approx(truth.amplitude).epsilon(1e-6));
  CHECK(fit.params.offset == Approx(truth.offset).epsilon(1e-6));
  CHECK(fit.r_squared >= 1.0 - 1e-12);
  CHECK(fit.weighted);
  for (double r : fit.residuals) CHECK(std::abs(r) <= 1e-8);

  const auto uniform = fit_curve(curve_points(truth, 9), {.weights = WeightMode::Uniform});
  CHECK_FALSE(uniform.weighted);
  CHECK(uniform.params.offset == Approx(truth.offset).epsilon(1e-6));
}

TEST_CASE("fit_curve recovers random in-range curves") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> floor(0.1, 1.0), amp(0.01, 0.3), off(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    const CurveParams truth{floor(rng), amp(rng), off(rng)};
    const auto fit = fit_curve(curve_points(truth, 9));
    CHECK(fit.params.floor == Approx(truth.floor).epsilon(1e-6));
    CHECK(fit.params.amplitude == Approx(truth.amplitude).epsilon(1e-6));
    CHECK(fit.params.offset == Approx(truth.offset).epsilon(1e-5));
    CHECK(fit.r_squared >= 1.0 - 1e-9);
  }
}

TEST_CASE("fit_curve on a flat series") {
  std::vector<CurvePoint> pts;
  for (int k = 1; k <= 6; ++k) pts.push_back({double(k), 0.42});
  const auto fit = fit_curve(pts);
  CHECK(fit.params.amplitude <= 1e-9);
  CHECK(fit.params.floor == Approx(0.42).epsilon(1e-12));
}

TEST_CASE("fit_curve on a noisy macro curve") {
  // Macro average of the nine domain laws at N = 32 plus N(0, 1e-3) noise.
  double true_floor = 0.0;
  for (const auto& d : testing::kAverageLaws) true_floor += d.params.floor_at(32) / 9.0;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1e-3);
  std::vector<CurvePoint> pts;
  for (int k = 1; k <= 9; ++k) {
    double ce = 0.0;
    for (const auto& d : testing::kAverageLaws) ce += eval_joint(d.params, 32, k) / 9.0;
    pts.push_back({double(k), ce + noise(rng)});
  }
  const auto fit = fit_curve(pts);
  CHECK(std::abs(fit.params.floor - true_floor) < 2e-3);
}

TEST_CASE("fit_curve: scaling the weights leaves the optimum in place") {
  const auto pts = curve_points({0.6, 0.1, 0.8}, 8);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 2e-3);
  auto noisy = pts;
  for (auto& p : noisy) p.value += noise(rng);
  std::vector<double> w{1, 3, 2, 5, 1, 4, 2, 2}, w_scaled;
  for (double x : w) w_scaled.push_back(x * 37.5);
  const auto a = fit_curve(noisy, {.custom_weights = w});
  const auto b = fit_curve(noisy, {.custom_weights = w_scaled});
  CHECK(a.params.floor == Approx(b.params.floor).epsilon(1e-12));
  CHECK(a.params.amplitude == Approx(b.params.amplitude).epsilon(1e-12));
  CHECK(a.params.offset == Approx(b.params.offset).epsilon(1e-12));
}

TEST_CASE("fit_curve input errors") {
  CHECK_THROWS_AS(fit_curve(std::vector<CurvePoint>{{1, 1}, {2, 0.9}}), InputError);
  CHECK_THROWS_AS(fit_curve(std::vector<CurvePoint>{{2, 1}, {2, 0.9}, {2, 0.8}}), InputError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_curve(std::vector<CurvePoint>{{1, nan}, {2, nan}, {3, nan}}), InputError);
  CHECK_THROWS_AS(fit_curve(curve_points({0.5, 0.1, 0.2}, 4), {.bounded_term = true}), InputError);
}

TEST_CASE("fit_curve with the bounded interference term") {
  const CurveParams truth{0.5, 0.2, 0.5};
  const BoundedTermParams extra{0.03, 2.0};
  const auto fit = fit_curve(curve_points(truth, 12, extra), {.bounded_term = true});
  REQUIRE(fit.bounded.has_value());
  CHECK(fit.r_squared >= 1.0 - 1e-9);
  for (double r : fit.residuals) CHECK(std::abs(r) <= 1e-6);
}

TEST_CASE("fit_joint recovers the algebra law") {
  const auto& truth = law("algebra");
  const auto fit = fit_joint(joint_points(truth));
  CHECK(std::abs(fit.params.floor_exp - truth.floor_exp) < 1e-3);
  CHECK(std::abs(fit.params.tail_exp - truth.tail_exp) < 1e-3);
  CHECK(fit.r_squared >= 0.9999);
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("fit_joint on a constant table is flagged degenerate") {
  const JointParams flat{0.37, 0, 0, 0, 0, 0};
  const auto fit = fit_joint(joint_points(flat));
  CHECK(fit.params.irreducible + fit.params.floor_coef == Approx(0.37).epsilon(1e-9));
  CHECK(fit.degenerate);
  CHECK_FALSE(fit.note.empty());
  for (double r : fit.residuals) CHECK(std::abs(r) < 1e-9);
}

TEST_CASE("fit_joint under 1% multiplicative noise") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (const auto& d : testing::kAverageLaws) {
    auto pts = joint_points(d.params);
    for (auto& p : pts) p.value *= 1.0 + noise(rng);
    const auto fit = fit_joint(pts);
    CHECK(fit.r_squared > 0.98);
  }
}

TEST_CASE("fit_joint from a measurement table uses cell means") {
  const auto& truth = law("code");
  MeasurementTable t;
  for (double n : testing::kSizes) {
    for (int k = 1; k <= 9; ++k) {
      const double v = eval_joint(truth, n, k);
      t.add({"average", n, k, "code", "g1", v * 1.01});
      t.add({"average", n, k, "code", "g2", v * 0.99});
    }
  }
  const auto fit = fit_joint(t);
  CHECK(fit.r_squared >= 1.0 - 1e-9);
  CHECK(fit.params.floor_exp == Approx(truth.floor_exp).epsilon(1e-3));

  t.add({"average", 3, 1, "physics", "g1", 0.7});
  CHECK_THROWS_AS(fit_joint(t), InputError);
}

TEST_CASE("fit_joint input errors") {
  const std::array<double, 1> one{3.0};
  CHECK_THROWS_AS(fit_joint(joint_points(law("code"), one)), InputError);
  CHECK_THROWS_AS(fit_joint(joint_points(law("code"), testing::kSizes, 2)), InputError);
}

TEST_CASE("per-domain and shared-offset joint fits") {
  MeasurementTable t;
  for (const auto* name : {"algebra", "code", "physics"}) {
    for (double n : testing::kSizes) {
      for (int k = 1; k <= 9; ++k) t.add({"average", n, k, name, "g", eval_joint(law(name), n, k)});
    }
  }
  const auto per = fit_joint_by_domain(t, {}, OffsetSharing::PerDomain);
  REQUIRE(per.size() == 3);
  for (const auto& f : per) CHECK(f.fit.r_squared >= 1.0 - 1e-9);

  const auto shared = fit_joint_by_domain(t, {}, OffsetSharing::Shared);
  REQUIRE(shared.size() == 3);
  for (const auto& f : shared) {
    CHECK(f.fit.params.offset == shared.front().fit.params.offset);
    CHECK(f.fit.r_squared > 0.99);
  }
}

TEST_CASE("variance fits") {
  SUBCASE("biology variance law at N = 72") {
    std::vector<JointPoint> pts;
    for (double n : {0.5, 1.5, 3.0, 7.0, 14.0, 32.0, 72.0}) {
      for (int k = 1; k <= 9; ++k) pts.push_back({n, double(k), eval_joint(testing::kBiologyVariance, n, k)});
    }
    const auto fit = fit_variance(pts);
    CHECK_FALSE(fit.weighted);
    CHECK(fit.predict(72, 1) == Approx(0.0229).epsilon(0.05));
    CHECK(fit.predict(72, 3) == Approx(0.00889).epsilon(0.05));
    CHECK(fit.predict(72, 9) == Approx(0.00314).epsilon(0.05));
  }
  SUBCASE("exact 1/k variances") {
    std::vector<JointPoint> pts;
    for (double n : {7.0, 32.0, 72.0}) {
      for (int k = 1; k <= 9; ++k) pts.push_back({n, double(k), 0.0229 / k});
    }
    const auto fit = fit_variance(pts);
    CHECK(fit.predict(72, 3) == Approx(0.0229 / 3).epsilon(1e-6));
    // log-log slope of the fitted curve
    std::vector<double> lx, ly;
    for (int k = 1; k <= 9; ++k) {
      lx.push_back(std::log(k));
      ly.push_back(std::log(fit.predict(72, k)));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 9, my = std::accumulate(ly.begin(), ly.end(), 0.0) / 9;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 9; ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    CHECK(sxy / sxx == Approx(-1.0).epsilon(1e-6));
  }
  SUBCASE("constant variances") {
    std::vector<JointPoint> pts;
    for (double n : {1.0, 4.0, 16.0}) {
      for (int k = 1; k <= 6; ++k) pts.push_back({n, double(k), 2e-3});
    }
    const auto fit = fit_variance(pts);
    CHECK(fit.params.tail_coef == Approx(0.0).epsilon(1e-9));
    for (double n : {1.0, 4.0, 16.0}) CHECK(fit.params.floor_at(n) == Approx(2e-3).epsilon(1e-6));
  }
}

TEST_CASE("cell variances use n - 1 and ignore group order") {
  MeasurementTable a, b;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.01);
  struct Row {
    double n;
    int k;
    std::string g;
    double ce;
  };
  std::vector<Row> rows;
  for (double n : {1.0, 4.0}) {
    for (int k = 1; k <= 4; ++k) {
      for (int g = 0; g < 5; ++g) rows.push_back({n, k, "g" + std::to_string(g), 0.5 + noise(rng)});
    }
  }
  for (const auto& r : rows) a.add({"average", r.n, r.k, "code", r.g, r.ce});
  std::shuffle(rows.begin(), rows.end(), rng);
  for (const auto& r : rows) b.add({"average", r.n, r.k, "code", r.g + "x", r.ce});

  const auto va = cell_variances(a);
  const auto vb = cell_variances(b);
  REQUIRE(va.size() == 8);
  for (std::size_t i = 0; i < va.size(); ++i) CHECK(va[i].value == vb[i].value);

  // direct n-1 estimate of the first cell
  std::vector<double> xs;
  for (const auto& r : a.rows()) {
    if (r.size == 1.0 && r.k == 1) xs.push_back(r.ce);
  }
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  CHECK(va[0].value == Approx(ss / (xs.size() - 1)).epsilon(1e-12));

  MeasurementTable lonely;
  lonely.add({"average", 1.0, 1, "code", "g", 0.5});
  CHECK_THROWS_AS(cell_variances(lonely), InputError);
}

TEST_CASE("fit_dispersion") {
  auto gen = [](double c0, double c1, double b) {
    std::vector<CurvePoint> pts;
    for (int k = 1; k <= 9; ++k) pts.push_back({double(k), c0 + c1 / (k + b)});
    return pts;
  };
  SUBCASE("small-model row") {
    for (double c0 : {0.002, -0.002}) {
      const auto fit = fit_dispersion(gen(c0, 0.033, 2.0));
      CHECK(fit.params.offset == 2.0);
      CHECK(std::abs(fit.params.floor - c0) < 1e-9);
      CHECK(std::abs(fit.params.amplitude - 0.033) < 1e-9);
    }
  }
  SUBCASE("constant std") {
    const auto fit = fit_dispersion(gen(0.01, 0.0, 0.0));
    CHECK(fit.params.amplitude == Approx(0.0).epsilon(1e-12));
    CHECK(fit.params.floor == Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("1/(k+1)") {
    const auto fit = fit_dispersion(gen(0.0, 0.02, 1.0));
    CHECK(fit.params.offset == 1.0);
  }
  SUBCASE("too few points") {
    CHECK_THROWS_AS(fit_dispersion(std::vector<CurvePoint>{{1, 0.1}, {2, 0.05}}), InputError);
  }
}

TEST_CASE("report JSON carries params, r_squared, residuals and the grid") {
  const auto fit = fit_curve(curve_points({0.5, 0.2, 0.5}, 5));
  const auto j = to_report_json(fit);
  CHECK(j.contains("params"));
  CHECK(j.contains("r_squared"));
  REQUIRE(j["points"].size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(j["points"][i]["residual"].get<double>() == fit.residuals[i]);
  CHECK(j["params"].contains("L_inf"));
  CHECK(j["weighted"] == true);

  const auto d = to_report_json(fit_dispersion(std::vector<CurvePoint>{{1, 0.03}, {2, 0.02}, {3, 0.015}}));
  CHECK(d["params"].contains("c0"));
  CHECK(d["params"].contains("c1"));
  CHECK(d["params"].contains("b"));
}
