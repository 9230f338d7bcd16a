#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mergelaw/exec.hpp"

namespace mergelaw {

// Quadratic loss L(theta0 + d) = L0 + g.d + d'Hd/2 with task vectors drawn
// i.i.d. with mean mu and covariance Sigma, merged as (c/k) sum_i v_i.
struct QuadraticWorld {
  double base_loss = 0.0;   // L0
  Eigen::VectorXd gradient;   // g
  Eigen::MatrixXd curvature;  // H, symmetric
  Eigen::VectorXd mean;       // mu
  Eigen::MatrixXd covariance; // Sigma, symmetric PSD
  double scale = 1.0;         // c

  Eigen::Index dim() const { return gradient.size(); }
  // Throws InputError on inconsistent dimensions or asymmetric H / Sigma.
  void validate() const;

  double loss_at(const Eigen::VectorXd& displacement) const;
};

// L0 + c g'mu + c^2 mu'H mu / 2
double closed_form_floor(const QuadraticWorld& w);
// c^2 Tr(H Sigma) / 2
double closed_form_tail(const QuadraticWorld& w);
// c^2 a'Sigma a / k + c^4 Tr((H Sigma)^2) / (2 k^2), a = g + c H mu.
// Exact for Gaussian task vectors.
double closed_form_variance_gaussian(const QuadraticWorld& w, int k);

enum class TaskDistribution {
  Gaussian,
  // mu + F u with u uniform on [-sqrt(3), sqrt(3)]^dim: same mean and
  // covariance, bounded support.
  BoundedUniform,
};

struct SimRecord {
  int k = 1;
  double mean = 0.0;
  double variance = 0.0;  // sample (n-1)
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
  std::size_t trials = 0;
};

struct SimResult {
  std::vector<SimRecord> records;
};

// Symmetric square root factor F with F F' = Sigma. Negative eigenvalues down
// to -1e-10 * max|lambda| are clamped to zero; anything lower throws.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma);

// Every trial draws from its own RNG stream keyed by (seed, k, trial), so the
// result is bit-identical for any thread count and for both Exec modes.
SimResult simulate(const QuadraticWorld& world, const std::vector<int>& k_grid, std::size_t trials,
                   std::uint64_t seed, TaskDistribution dist = TaskDistribution::Gaussian,
                   Exec exec = Exec::Parallel);

// OLS slope of log(variance) on log(k).
double slope_check(const SimResult& result);
double log_log_slope(const std::vector<double>& ks, const std::vector<double>& values);

// world.json: dim, L0, g, H, mu, Sigma, c. H and Sigma accept a dense matrix,
// "identity", {"identity": s}, or {"diagonal": [...]}; vectors accept a
// list, a scalar (broadcast) or "zeros"/"ones".
QuadraticWorld world_from_json(const nlohmann::json& j);

}  // namespace mergelaw
