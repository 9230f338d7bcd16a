#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mergelaw::opt {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::vector<double> clamp(std::vector<double> x) const;
};

struct NelderMeadOptions {
  std::vector<double> initial_step;  // per coordinate; defaults to 0.1
  double x_tolerance = 1e-10;        // simplex diameter
  double f_tolerance = 1e-22;        // spread of simplex values
  int max_evaluations = 4000;
};

struct Minimum {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

// Bounded Nelder-Mead: trial points are clamped into the box before they are
// evaluated.
Minimum nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                    const Box& box, const NelderMeadOptions& options = {});

// Golden-section search for a minimum of a unimodal f on [lo, hi].
Minimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tolerance = 1e-12);

struct LinearFit {
  Eigen::VectorXd coef;
  double sse = 0.0;  // weighted
};

// min sum_i w_i (y_i - X_i c)^2 subject to c_j >= 0 where nonneg[j].
// Exact for the handful of columns used here: if the unconstrained solution
// is infeasible, every clipping pattern is re-solved and the best feasible
// one wins.
LinearFit bounded_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                const std::vector<bool>& nonneg);

}  // namespace mergelaw::opt
