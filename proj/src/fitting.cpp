#include "mergelaw/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "mergelaw/error.hpp"
#include "mergelaw/optimize.hpp"

namespace mergelaw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double r_squared(std::span<const double> observed, std::span<const double> fitted) {
  if (observed.size() != fitted.size()) throw InputError("r_squared: length mismatch");
  if (observed.size() < 2) throw InputError("r_squared needs at least 2 points");
  const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
    ss_res += (observed[i] - fitted[i]) * (observed[i] - fitted[i]);
  }
  if (ss_tot == 0.0) throw NumericalError("r_squared undefined: observed values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

namespace {

// R^2 for reports; a perfectly flat series fitted exactly counts as 1.
double report_r_squared(std::span<const double> observed, std::span<const double> fitted) {
  try {
    return r_squared(observed, fitted);
  } catch (const NumericalError&) {
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (std::abs(observed[i] - fitted[i]) > 1e-12 * std::max(1.0, std::abs(observed[i]))) return 0.0;
    }
    return 1.0;
  }
}

VectorXd make_weights(std::span<const double> ks, WeightMode mode) {
  VectorXd w(static_cast<Eigen::Index>(ks.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    w(static_cast<Eigen::Index>(i)) = mode == WeightMode::ProportionalToK ? ks[i] : 1.0;
  }
  return w / w.sum();
}

// ---------------------------------------------------------------------------
// Curve fits

struct CurveProblem {
  std::vector<CurvePoint> points;
  VectorXd k, y, w;
};

CurveProblem prepare_curve(std::span<const CurvePoint> points, const CurveFitOptions& options) {
  if (!options.custom_weights.empty() && options.custom_weights.size() != points.size()) {
    throw InputError("custom_weights must have one entry per point");
  }
  CurveProblem prob;
  std::vector<double> raw_w;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].value) || !std::isfinite(points[i].k)) continue;
    prob.points.push_back(points[i]);
    if (!options.custom_weights.empty()) raw_w.push_back(options.custom_weights[i]);
  }
  if (prob.points.empty()) throw InputError("fit_curve: no finite points (all-NaN input)");
  const std::size_t needed = options.bounded_term ? 5 : 3;
  std::set<double> distinct;
  for (const auto& p : prob.points) distinct.insert(p.k);
  if (distinct.size() == 1 && prob.points.size() > 1) throw InputError("fit_curve: degenerate design (all k equal)");
  if (prob.points.size() < needed) {
    throw InputError("fit_curve needs at least " + std::to_string(needed) + " points");
  }
  if (distinct.size() != prob.points.size()) throw InputError("fit_curve: k values must be distinct");

  const auto n = static_cast<Eigen::Index>(prob.points.size());
  prob.k.resize(n);
  prob.y.resize(n);
  std::vector<double> ks;
  for (Eigen::Index i = 0; i < n; ++i) {
    prob.k(i) = prob.points[static_cast<std::size_t>(i)].k;
    prob.y(i) = prob.points[static_cast<std::size_t>(i)].value;
    ks.push_back(prob.k(i));
  }
  if (!raw_w.empty()) {
    prob.w = Eigen::Map<const VectorXd>(raw_w.data(), n);
    if ((prob.w.array() <= 0.0).any()) throw InputError("custom weights must be positive");
    prob.w /= prob.w.sum();
  } else {
    prob.w = make_weights(ks, options.weights);
  }
  return prob;
}

opt::LinearFit solve_curve(const CurveProblem& prob, double offset) {
  MatrixXd x(prob.k.size(), 2);
  x.col(0).setOnes();
  x.col(1) = (prob.k.array() + offset).inverse().matrix();
  return opt::bounded_least_squares(x, prob.y, prob.w, {false, true});
}

opt::LinearFit solve_curve_bounded(const CurveProblem& prob, double offset, double saturation) {
  MatrixXd x(prob.k.size(), 3);
  x.col(0).setOnes();
  x.col(1) = (prob.k.array() + offset).inverse().matrix();
  x.col(2) = (prob.k.array() / (prob.k.array() + saturation)).matrix();
  return opt::bounded_least_squares(x, prob.y, prob.w, {false, true, true});
}

void finish_curve(CurveFit& fit, const CurveProblem& prob) {
  fit.points = prob.points;
  std::vector<double> obs, pred;
  for (const auto& p : prob.points) {
    obs.push_back(p.value);
    pred.push_back(fit.predict(p.k));
    fit.residuals.push_back(p.value - pred.back());
  }
  fit.r_squared = report_r_squared(obs, pred);
}

// ---------------------------------------------------------------------------
// Joint fits

struct JointProblem {
  std::vector<JointPoint> points;
  VectorXd n, k, y, w;
};

JointProblem prepare_joint(std::span<const JointPoint> points, WeightMode mode) {
  JointProblem prob;
  for (const auto& p : points) {
    if (std::isfinite(p.value) && p.size > 0.0 && p.k >= 1.0) prob.points.push_back(p);
  }
  std::set<double> sizes, ks;
  for (const auto& p : prob.points) {
    sizes.insert(p.size);
    ks.insert(p.k);
  }
  if (sizes.size() < 2 || ks.size() < 3) {
    throw InputError("insufficient grid coverage: joint fits need >= 2 distinct N and >= 3 distinct k (got " +
                     std::to_string(sizes.size()) + " N, " + std::to_string(ks.size()) + " k)");
  }
  const auto m = static_cast<Eigen::Index>(prob.points.size());
  prob.n.resize(m);
  prob.k.resize(m);
  prob.y.resize(m);
  std::vector<double> kv;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = prob.points[static_cast<std::size_t>(i)];
    prob.n(i) = p.size;
    prob.k(i) = p.k;
    prob.y(i) = p.value;
    kv.push_back(p.k);
  }
  prob.w = make_weights(kv, mode);
  return prob;
}

opt::LinearFit solve_joint(const JointProblem& prob, double beta, double gamma, double offset) {
  MatrixXd x(prob.n.size(), 3);
  x.col(0).setOnes();
  x.col(1) = prob.n.array().pow(-beta).matrix();
  x.col(2) = (prob.n.array().pow(-gamma) / (prob.k.array() + offset)).matrix();
  return opt::bounded_least_squares(x, prob.y, prob.w, {true, true, true});
}

struct Candidate {
  std::vector<double> x;  // beta, gamma[, b0]
  double sse = std::numeric_limits<double>::infinity();
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.sse != b.sse) return a.sse < b.sse;
  return a.x < b.x;
}

std::vector<double> default_grid(double step, double max) {
  std::vector<double> g;
  for (int i = 0; i * step <= max + 1e-12; ++i) g.push_back(i * step);
  return g;
}

JointFit run_joint(const JointProblem& prob, const JointFitOptions& options) {
  const auto exps = options.exponent_starts.empty() ? default_grid(0.1, 1.0) : options.exponent_starts;
  const auto offs = options.offset_starts.empty() ? default_grid(0.25, 2.0) : options.offset_starts;
  const bool free_offset = !options.fixed_offset.has_value();

  auto unpack = [&](std::span<const double> x) {
    return std::array<double, 3>{x[0], x[1], free_offset ? x[2] : *options.fixed_offset};
  };
  auto objective = [&](std::span<const double> x) {
    const auto [beta, gamma, b0] = unpack(x);
    return solve_joint(prob, beta, gamma, b0).sse;
  };

  std::vector<Candidate> starts;
  for (double beta : exps) {
    for (double gamma : exps) {
      if (free_offset) {
        for (double b0 : offs) {
          Candidate c{{beta, gamma, b0}};
          c.sse = objective(c.x);
          starts.push_back(std::move(c));
        }
      } else {
        Candidate c{{beta, gamma}};
        c.sse = objective(c.x);
        starts.push_back(std::move(c));
      }
    }
  }
  std::sort(starts.begin(), starts.end(), better);
  starts.resize(std::min<std::size_t>(starts.size(), static_cast<std::size_t>(std::max(1, options.refine_starts))));

  opt::Box box;
  box.lower = {0.0, 0.0, 0.0};
  box.upper = {options.exponent_max, options.exponent_max, options.offset_max};
  if (!free_offset) {
    box.lower.resize(2);
    box.upper.resize(2);
  }
  opt::NelderMeadOptions nm;
  nm.initial_step = {0.05, 0.05, 0.1};

  // Starts are independent; selection below is by (sse, params) so the
  // outcome does not depend on the schedule.
  std::vector<Candidate> refined(starts.size());
  const auto count = static_cast<std::int64_t>(starts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t s = 0; s < count; ++s) {
    auto first = opt::nelder_mead(objective, starts[static_cast<std::size_t>(s)].x, box, nm);
    auto second = opt::nelder_mead(objective, first.x, box, nm);  // restart guards against early collapse
    refined[static_cast<std::size_t>(s)] = Candidate{second.x, second.value};
  }
  const Candidate best = *std::min_element(refined.begin(), refined.end(), better);

  const auto [beta, gamma, b0] = unpack(best.x);
  const auto lin = solve_joint(prob, beta, gamma, b0);
  JointFit fit;
  fit.params = JointParams{lin.coef(0), lin.coef(1), beta, lin.coef(2), gamma, b0};
  fit.weighted_sse = lin.sse;
  fit.points = prob.points;
  std::vector<double> obs, pred;
  for (const auto& p : prob.points) {
    obs.push_back(p.value);
    pred.push_back(fit.predict(p.size, p.k));
    fit.residuals.push_back(p.value - pred.back());
  }
  fit.r_squared = report_r_squared(obs, pred);

  const double scale = std::max(1e-300, prob.y.cwiseAbs().maxCoeff());
  const bool no_floor_term = fit.params.floor_coef <= 1e-12 * scale;
  const bool no_tail_term = fit.params.tail_coef <= 1e-12 * scale;
  if (no_floor_term || no_tail_term) {
    fit.degenerate = true;
    if (no_floor_term) fit.note += "B = 0: beta unidentifiable. ";
    if (no_tail_term) fit.note += "A0 = 0: gamma and b0 unidentifiable. ";
  }
  return fit;
}

std::vector<JointPoint> cell_means(const MeasurementTable& slice) {
  if (slice.methods().size() > 1 || slice.domains().size() > 1) {
    throw InputError("joint fits expect a single-method, single-domain slice");
  }
  std::vector<JointPoint> pts;
  for (const auto& c : cell_statistics(slice)) pts.push_back({c.size, static_cast<double>(c.k), c.mean});
  return pts;
}

}  // namespace

// ---------------------------------------------------------------------------

CurveFit fit_curve(std::span<const CurvePoint> points, const CurveFitOptions& options) {
  if (!(options.offset_max >= 0.0) || !(options.offset_step > 0.0)) throw InputError("bad offset grid");
  const CurveProblem prob = prepare_curve(points, options);

  CurveFit fit;
  fit.weighted = !options.custom_weights.empty() || options.weights == WeightMode::ProportionalToK;

  if (!options.bounded_term) {
    const int cells = static_cast<int>(std::floor(options.offset_max / options.offset_step + 1e-9));
    double best_b = 0.0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= cells; ++i) {
      const double b = i * options.offset_step;
      const double sse = solve_curve(prob, b).sse;
      if (sse < best_sse) {
        best_sse = sse;
        best_b = b;
      }
    }
    const double lo = std::max(0.0, best_b - options.offset_step);
    const double hi = std::min(options.offset_max, best_b + options.offset_step);
    const auto refined = opt::golden_section([&](double b) { return solve_curve(prob, b).sse; }, lo, hi, 1e-12);
    if (refined.value < best_sse) best_b = refined.x[0];

    const auto lin = solve_curve(prob, best_b);
    fit.params = CurveParams{lin.coef(0), lin.coef(1), best_b};
    fit.weighted_sse = lin.sse;
  } else {
    auto objective = [&](std::span<const double> x) { return solve_curve_bounded(prob, x[0], x[1]).sse; };
    std::vector<Candidate> starts;
    for (double b = 0.0; b <= options.offset_max + 1e-12; b += 0.25) {
      for (double q : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
        Candidate c{{b, q}};
        c.sse = objective(c.x);
        starts.push_back(std::move(c));
      }
    }
    std::sort(starts.begin(), starts.end(), better);
    opt::Box box{{0.0, 1e-3}, {options.offset_max, 1e3}};
    opt::NelderMeadOptions nm;
    nm.initial_step = {0.1, 0.2};
    Candidate best;
    for (std::size_t s = 0; s < std::min<std::size_t>(3, starts.size()); ++s) {
      auto m = opt::nelder_mead(objective, starts[s].x, box, nm);
      Candidate c{m.x, m.value};
      if (better(c, best)) best = c;
    }
    const auto lin = solve_curve_bounded(prob, best.x[0], best.x[1]);
    fit.params = CurveParams{lin.coef(0), lin.coef(1), best.x[0]};
    fit.bounded = BoundedTermParams{lin.coef(2), best.x[1]};
    fit.weighted_sse = lin.sse;
  }
  finish_curve(fit, prob);
  return fit;
}

JointFit fit_joint(std::span<const JointPoint> points, const JointFitOptions& options) {
  const JointProblem prob = prepare_joint(points, options.weights);
  JointFit fit = run_joint(prob, options);
  fit.weighted = options.weights == WeightMode::ProportionalToK;
  return fit;
}

JointFit fit_joint(const MeasurementTable& slice, const JointFitOptions& options) {
  const auto pts = cell_means(slice);
  return fit_joint(pts, options);
}

std::vector<DomainJointFit> fit_joint_by_domain(const MeasurementTable& slice, const JointFitOptions& options,
                                                OffsetSharing sharing) {
  std::vector<std::pair<std::string, JointProblem>> problems;
  for (const auto& d : slice.domains()) {
    problems.emplace_back(d, prepare_joint(cell_means(slice.filter(std::nullopt, d)), options.weights));
  }
  if (problems.empty()) throw InputError("no domains to fit");

  std::vector<DomainJointFit> out;
  if (sharing == OffsetSharing::PerDomain) {
    for (const auto& [d, prob] : problems) out.push_back({d, run_joint(prob, options)});
  } else {
    JointFitOptions inner = options;
    inner.refine_starts = std::min(options.refine_starts, 3);
    auto total = [&](double b0) {
      inner.fixed_offset = b0;
      double sse = 0.0;
      for (const auto& [d, prob] : problems) sse += run_joint(prob, inner).weighted_sse;
      return sse;
    };
    double best_b = 0.0, best_sse = std::numeric_limits<double>::infinity();
    for (double b = 0.0; b <= options.offset_max + 1e-12; b += 0.25) {
      const double s = total(b);
      if (s < best_sse) {
        best_sse = s;
        best_b = b;
      }
    }
    const auto refined = opt::golden_section(total, std::max(0.0, best_b - 0.25),
                                             std::min(options.offset_max, best_b + 0.25), 1e-4);
    if (refined.value < best_sse) best_b = refined.x[0];
    inner.fixed_offset = best_b;
    for (const auto& [d, prob] : problems) out.push_back({d, run_joint(prob, inner)});
  }
  for (auto& f : out) f.fit.weighted = options.weights == WeightMode::ProportionalToK;
  return out;
}

std::vector<JointPoint> cell_variances(const MeasurementTable& slice) {
  if (slice.methods().size() > 1 || slice.domains().size() > 1) {
    throw InputError("variance fits expect a single-method, single-domain slice");
  }
  std::vector<JointPoint> pts;
  for (const auto& c : cell_statistics(slice)) {
    if (c.count < 2) {
      throw InputError("cell N=" + std::to_string(c.size) + " k=" + std::to_string(c.k) +
                       " has fewer than 2 groups; sample variance undefined");
    }
    pts.push_back({c.size, static_cast<double>(c.k), c.variance});
  }
  return pts;
}

JointFit fit_variance(std::span<const JointPoint> variances) {
  JointFitOptions options;
  options.weights = WeightMode::Uniform;
  options.exponent_starts = default_grid(0.25, 3.0);
  return fit_joint(variances, options);
}

JointFit fit_variance(const MeasurementTable& slice) {
  const auto pts = cell_variances(slice);
  return fit_variance(pts);
}

DispersionFit fit_dispersion(std::span<const CurvePoint> std_by_k) {
  std::vector<CurvePoint> pts;
  for (const auto& p : std_by_k) {
    if (std::isfinite(p.value) && std::isfinite(p.k)) pts.push_back(p);
  }
  if (pts.size() < 3) throw InputError("fit_dispersion needs at least 3 points");

  CurveProblem prob;
  prob.points = pts;
  const auto n = static_cast<Eigen::Index>(pts.size());
  prob.k.resize(n);
  prob.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    prob.k(i) = pts[static_cast<std::size_t>(i)].k;
    prob.y(i) = pts[static_cast<std::size_t>(i)].value;
  }
  prob.w = VectorXd::Ones(n);

  DispersionFit fit;
  fit.sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 40; ++i) {
    const double b = i / 20.0;
    const auto lin = solve_curve(prob, b);
    if (lin.sse < fit.sse) {
      fit.sse = lin.sse;
      fit.params = DispersionParams{lin.coef(0), lin.coef(1), b};
    }
  }
  fit.points = pts;
  std::vector<double> obs, pred;
  for (const auto& p : pts) {
    obs.push_back(p.value);
    pred.push_back(fit.predict(p.k));
    fit.residuals.push_back(p.value - pred.back());
  }
  fit.r_squared = report_r_squared(obs, pred);
  return fit;
}

void to_json(nlohmann::json& j, const DispersionParams& p) {
  j = {{"c0", p.floor}, {"c1", p.amplitude}, {"b", p.offset}};
}

void from_json(const nlohmann::json& j, DispersionParams& p) {
  p.floor = j.at("c0").get<double>();
  p.amplitude = j.at("c1").get<double>();
  p.offset = j.at("b").get<double>();
}

nlohmann::json to_report_json(const CurveFit& fit) {
  nlohmann::json j;
  j["model"] = "curve";
  j["params"] = fit.params;
  j["bounded_term"] = fit.bounded ? nlohmann::json(*fit.bounded) : nlohmann::json(nullptr);
  j["r_squared"] = fit.r_squared;
  j["weighted"] = fit.weighted;
  j["weighted_sse"] = fit.weighted_sse;
  auto& pts = j["points"] = nlohmann::json::array();
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    pts.push_back({{"k", fit.points[i].k},
                   {"observed", fit.points[i].value},
                   {"fitted", fit.points[i].value - fit.residuals[i]},
                   {"residual", fit.residuals[i]}});
  }
  return j;
}

nlohmann::json to_report_json(const JointFit& fit) {
  nlohmann::json j;
  j["model"] = "joint";
  j["params"] = fit.params;
  j["r_squared"] = fit.r_squared;
  j["weighted"] = fit.weighted;
  j["weighted_sse"] = fit.weighted_sse;
  j["degenerate"] = fit.degenerate;
  if (!fit.note.empty()) j["note"] = fit.note;
  auto& pts = j["points"] = nlohmann::json::array();
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    pts.push_back({{"N", fit.points[i].size},
                   {"k", fit.points[i].k},
                   {"observed", fit.points[i].value},
                   {"fitted", fit.points[i].value - fit.residuals[i]},
                   {"residual", fit.residuals[i]}});
  }
  return j;
}

nlohmann::json to_report_json(const DispersionFit& fit) {
  nlohmann::json j;
  j["model"] = "dispersion";
  j["params"] = fit.params;
  j["r_squared"] = fit.r_squared;
  j["sse"] = fit.sse;
  auto& pts = j["points"] = nlohmann::json::array();
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    pts.push_back({{"k", fit.points[i].k},
                   {"observed", fit.points[i].value},
                   {"fitted", fit.points[i].value - fit.residuals[i]},
                   {"residual", fit.residuals[i]}});
  }
  return j;
}

}  // namespace mergelaw
