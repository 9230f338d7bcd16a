#include "mergelaw/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mergelaw/error.hpp"

namespace mergelaw::opt {

std::vector<double> Box::clamp(std::vector<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i < lower.size()) x[i] = std::max(x[i], lower[i]);
    if (i < upper.size()) x[i] = std::min(x[i], upper[i]);
  }
  return x;
}

Minimum nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                    const Box& box, const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> pts(n + 1, box.clamp(std::move(start)));
  for (std::size_t i = 0; i < n; ++i) {
    const double step = i < options.initial_step.size() ? options.initial_step[i] : 0.1;
    auto& p = pts[i + 1];
    p[i] += step;
    p = box.clamp(p);
    if (p[i] == pts[0][i]) p[i] -= step;  // pinned at the upper bound
    p = box.clamp(p);
  }
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  auto combine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return box.clamp(std::move(out));
  };

  while (evals < options.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t d = 0; d < n; ++d) diameter = std::max(diameter, std::abs(pts[i][d] - pts[best][d]));
    }
    if (diameter < options.x_tolerance) break;
    if (vals[worst] - vals[best] < options.f_tolerance && diameter < 1e3 * options.x_tolerance) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d] / static_cast<double>(n);
    }

    auto reflected = combine(centroid, pts[worst], -1.0);
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      auto expanded = combine(centroid, pts[worst], -2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = std::move(expanded);
        vals[worst] = fe;
      } else {
        pts[worst] = std::move(reflected);
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = std::move(reflected);
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    auto contracted = outside ? combine(centroid, reflected, 0.5) : combine(centroid, pts[worst], 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = std::move(contracted);
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = combine(pts[best], pts[i], 0.5);
      vals[i] = eval(pts[i]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], evals};
}

Minimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tolerance) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  int evals = 2;
  while (b - a > tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  // Endpoints are candidates too: a monotone f drives the bracket to a bound.
  double x = fc <= fd ? c : d;
  double v = std::min(fc, fd);
  for (double edge : {lo, hi}) {
    const double fe = f(edge);
    ++evals;
    if (fe < v) {
      v = fe;
      x = edge;
    }
  }
  return {{x}, v, evals};
}

namespace {

LinearFit solve_subset(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& sqrt_w,
                       const std::vector<bool>& active) {
  const Eigen::Index cols = design.cols();
  std::vector<Eigen::Index> free_cols;
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (active[static_cast<std::size_t>(j)]) free_cols.push_back(j);
  }
  LinearFit fit;
  fit.coef = Eigen::VectorXd::Zero(cols);
  const Eigen::VectorXd wy = sqrt_w.cwiseProduct(y);
  if (!free_cols.empty()) {
    Eigen::MatrixXd sub(design.rows(), static_cast<Eigen::Index>(free_cols.size()));
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
      sub.col(static_cast<Eigen::Index>(c)) = sqrt_w.cwiseProduct(design.col(free_cols[c]));
    }
    const Eigen::VectorXd sol = sub.completeOrthogonalDecomposition().solve(wy);
    for (std::size_t c = 0; c < free_cols.size(); ++c) fit.coef(free_cols[c]) = sol(static_cast<Eigen::Index>(c));
  }
  fit.sse = (wy - sqrt_w.asDiagonal() * (design * fit.coef)).squaredNorm();
  return fit;
}

}  // namespace

LinearFit bounded_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                const std::vector<bool>& nonneg) {
  const auto cols = static_cast<std::size_t>(design.cols());
  if (nonneg.size() != cols) throw InputError("nonneg mask must match the design columns");
  if (design.rows() != y.size() || w.size() != y.size()) throw InputError("least-squares operands disagree in size");
  const Eigen::VectorXd sqrt_w = w.cwiseSqrt();

  auto feasible = [&](const LinearFit& f) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (nonneg[j] && f.coef(static_cast<Eigen::Index>(j)) < 0.0) return false;
    }
    return true;
  };

  LinearFit best = solve_subset(design, y, sqrt_w, std::vector<bool>(cols, true));
  if (feasible(best)) return best;

  std::vector<std::size_t> constrained;
  for (std::size_t j = 0; j < cols; ++j) {
    if (nonneg[j]) constrained.push_back(j);
  }
  bool found = false;
  for (std::uint32_t mask = 1; mask < (1u << constrained.size()); ++mask) {
    std::vector<bool> active(cols, true);
    for (std::size_t b = 0; b < constrained.size(); ++b) {
      if (mask & (1u << b)) active[constrained[b]] = false;
    }
    LinearFit cand = solve_subset(design, y, sqrt_w, active);
    if (!feasible(cand)) continue;
    if (!found || cand.sse < best.sse) {
      best = std::move(cand);
      found = true;
    }
  }
  if (!found) throw NumericalError("bounded least squares has no feasible solution");
  return best;
}

}  // namespace mergelaw::opt
