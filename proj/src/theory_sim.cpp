#include "mergelaw/theory_sim.hpp"

#include <cmath>
#include <random>

#include "mergelaw/error.hpp"
#include "mergelaw/rng.hpp"

namespace mergelaw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void QuadraticWorld::validate() const {
  const auto d = dim();
  if (d < 1) throw InputError("world dimension must be >= 1");
  if (curvature.rows() != d || curvature.cols() != d) throw InputError("H must be dim x dim");
  if (covariance.rows() != d || covariance.cols() != d) throw InputError("Sigma must be dim x dim");
  if (mean.size() != d) throw InputError("mu must have length dim");
  const double htol = 1e-12 * std::max(1.0, curvature.cwiseAbs().maxCoeff());
  if ((curvature - curvature.transpose()).cwiseAbs().maxCoeff() > htol) throw InputError("H must be symmetric");
  const double stol = 1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > stol) {
    throw InputError("Sigma must be symmetric");
  }
  if (!(scale > 0.0)) throw InputError("merge scale c must be > 0");
}

double QuadraticWorld::loss_at(const VectorXd& displacement) const {
  return base_loss + gradient.dot(displacement) + 0.5 * displacement.dot(curvature * displacement);
}

double closed_form_floor(const QuadraticWorld& w) {
  w.validate();
  const double c = w.scale;
  return w.base_loss + c * w.gradient.dot(w.mean) + 0.5 * c * c * w.mean.dot(w.curvature * w.mean);
}

double closed_form_tail(const QuadraticWorld& w) {
  w.validate();
  return 0.5 * w.scale * w.scale * (w.curvature * w.covariance).trace();
}

double closed_form_variance_gaussian(const QuadraticWorld& w, int k) {
  w.validate();
  if (k < 1) throw InputError("k must be >= 1");
  const double c = w.scale;
  const VectorXd a = w.gradient + c * (w.curvature * w.mean);
  const MatrixXd hs = w.curvature * w.covariance;
  const double kd = k;
  return c * c * a.dot(w.covariance * a) / kd + std::pow(c, 4) * (hs * hs).trace() / (2.0 * kd * kd);
}

MatrixXd covariance_factor(const MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Sigma failed");
  VectorXd lambda = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -tol) throw NumericalError("Sigma is not positive semidefinite");
    lambda(i) = std::sqrt(std::max(0.0, lambda(i)));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

SimRecord summarize(int k, const std::vector<double>& losses) {
  const auto n = static_cast<double>(losses.size());
  double sum = 0.0;
  for (double x : losses) sum += x;
  const double mean = sum / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : losses) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  SimRecord r;
  r.k = k;
  r.trials = losses.size();
  r.mean = mean;
  r.variance = m2 / (n - 1.0);
  r.se_mean = std::sqrt(r.variance / n);
  const double fourth = m4 / n;
  const double var_of_var = (fourth - (n - 3.0) / (n - 1.0) * r.variance * r.variance) / n;
  r.se_variance = std::sqrt(std::max(0.0, var_of_var));
  return r;
}

}  // namespace

SimResult simulate(const QuadraticWorld& world, const std::vector<int>& k_grid, std::size_t trials,
                   std::uint64_t seed, TaskDistribution dist, Exec exec) {
  world.validate();
  if (k_grid.empty()) throw InputError("k grid must be nonempty");
  if (trials < 2) throw InputError("simulation needs at least 2 trials per k");
  for (int k : k_grid) {
    if (k < 1) throw InputError("k values must be >= 1");
  }
  const MatrixXd factor = covariance_factor(world.covariance);
  const auto dim = world.dim();
  const double c = world.scale;
  const double half_width = std::sqrt(3.0);

  SimResult result;
  for (int k : k_grid) {
    std::vector<double> losses(trials);
    const auto count = static_cast<std::int64_t>(trials);
#pragma omp parallel if (exec == Exec::Parallel)
    {
      VectorXd noise_sum(dim), displacement(dim);
#pragma omp for schedule(static)
      for (std::int64_t t = 0; t < count; ++t) {
        std::mt19937_64 engine(rng::stream_key({seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t)}));
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> uniform(-half_width, half_width);
        noise_sum.setZero();
        for (int i = 0; i < k; ++i) {
          for (Eigen::Index d = 0; d < dim; ++d) {
            noise_sum(d) += dist == TaskDistribution::Gaussian ? normal(engine) : uniform(engine);
          }
        }
        // (c/k) sum_i (mu + F z_i) = c mu + (c/k) F sum_i z_i
        displacement.noalias() = (c / k) * (factor * noise_sum);
        displacement += c * world.mean;
        losses[static_cast<std::size_t>(t)] = world.loss_at(displacement);
      }
    }
    result.records.push_back(summarize(k, losses));
  }
  return result;
}

double log_log_slope(const std::vector<double>& ks, const std::vector<double>& values) {
  if (ks.size() != values.size()) throw InputError("slope: length mismatch");
  if (ks.size() < 3) throw InputError("slope check needs at least 3 k values");
  double sx = 0, sy = 0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(values[i] > 0.0)) throw NumericalError("slope check: nonpositive variance estimate");
    if (!(ks[i] > 0.0)) throw InputError("slope check: k must be positive");
    lx.push_back(std::log(ks[i]));
    ly.push_back(std::log(values[i]));
    sx += lx.back();
    sy += ly.back();
  }
  const double n = static_cast<double>(ks.size());
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw InputError("slope check needs distinct k values");
  return sxy / sxx;
}

double slope_check(const SimResult& result) {
  std::vector<double> ks, vs;
  for (const auto& r : result.records) {
    ks.push_back(r.k);
    vs.push_back(r.variance);
  }
  return log_log_slope(ks, vs);
}

namespace {

VectorXd parse_vector(const nlohmann::json& j, Eigen::Index dim, const char* what) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "zeros") return VectorXd::Zero(dim);
    if (s == "ones") return VectorXd::Ones(dim);
    throw InputError(std::string(what) + ": unknown shorthand '" + s + "'");
  }
  if (j.is_number()) return VectorXd::Constant(dim, j.get<double>());
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
    throw InputError(std::string(what) + " must be a list of length dim");
  }
  VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

MatrixXd parse_matrix(const nlohmann::json& j, Eigen::Index dim, const char* what) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity") return MatrixXd::Identity(dim, dim);
    throw InputError(std::string(what) + ": unknown shorthand");
  }
  if (j.is_object()) {
    if (j.contains("identity")) return j["identity"].get<double>() * MatrixXd::Identity(dim, dim);
    if (j.contains("diagonal")) return parse_vector(j["diagonal"], dim, what).asDiagonal();
    throw InputError(std::string(what) + ": expected {\"identity\": s} or {\"diagonal\": [...]}");
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
    throw InputError(std::string(what) + " must be a dim x dim list of rows");
  }
  MatrixXd m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
      throw InputError(std::string(what) + " must be a dim x dim list of rows");
    }
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

QuadraticWorld world_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<Eigen::Index>();
    if (dim < 1) throw InputError("dim must be >= 1");
    QuadraticWorld w;
    w.base_loss = j.value("L0", 0.0);
    w.gradient = parse_vector(j.at("g"), dim, "g");
    w.curvature = parse_matrix(j.at("H"), dim, "H");
    w.mean = parse_vector(j.at("mu"), dim, "mu");
    w.covariance = parse_matrix(j.at("Sigma"), dim, "Sigma");
    w.scale = j.value("c", 1.0);
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("world config: ") + e.what());
  }
}

}  // namespace mergelaw
