#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergelaw/measurements.hpp"
#include "mergelaw/scaling_law.hpp"

namespace mergelaw {

enum class WeightMode { Uniform, ProportionalToK };

struct CurvePoint {
  double k = 1.0;
  double value = 0.0;
};

struct JointPoint {
  double size = 1.0;  // N, billions
  double k = 1.0;
  double value = 0.0;
};

// 1 - SS_res / SS_tot. Throws NumericalError when observed has zero variance.
double r_squared(std::span<const double> observed, std::span<const double> fitted);

// ---------------------------------------------------------------------------
// Per-curve fits: L(k) = L_inf + A / (k + b) [+ D k / (k + q)]

struct CurveFitOptions {
  WeightMode weights = WeightMode::ProportionalToK;
  // When non-empty, one weight per point; overrides `weights`.
  std::vector<double> custom_weights;
  bool bounded_term = false;
  double offset_max = 5.0;
  double offset_step = 0.01;
};

struct CurveFit {
  CurveParams params;
  std::optional<BoundedTermParams> bounded;
  double r_squared = 0.0;  // unweighted
  double weighted_sse = 0.0;
  std::vector<CurvePoint> points;
  std::vector<double> residuals;  // observed - fitted
  bool weighted = false;

  double predict(double k) const { return eval_curve(params, k, bounded); }
};

// Variable projection: grid over b with an inner weighted least-squares
// solve for (L_inf, A >= 0), golden-section refinement around the best cell.
// The bounded variant searches (b, q) by grid + Nelder-Mead and solves
// (L_inf, A >= 0, D >= 0) inside.
CurveFit fit_curve(std::span<const CurvePoint> points, const CurveFitOptions& options = {});

// ---------------------------------------------------------------------------
// Joint (N, k) fits: L* + B N^-beta + A0 N^-gamma / (k + b0)

struct JointFitOptions {
  WeightMode weights = WeightMode::ProportionalToK;
  std::optional<double> fixed_offset;  // hold b0 fixed (shared-offset mode)
  double exponent_max = 3.0;
  double offset_max = 5.0;
  std::vector<double> exponent_starts;  // defaults to 0, 0.1, ..., 1.0
  std::vector<double> offset_starts;    // defaults to 0, 0.25, ..., 2.0
  int refine_starts = 6;
};

struct JointFit {
  JointParams params;
  double r_squared = 0.0;  // unweighted
  double weighted_sse = 0.0;
  std::vector<JointPoint> points;
  std::vector<double> residuals;
  bool weighted = false;
  // Set when B or A0 is zero and the matching exponent (and offset) cannot
  // be identified from the data.
  bool degenerate = false;
  std::string note;

  double predict(double size, double k) const { return eval_joint(params, size, k); }
};

JointFit fit_joint(std::span<const JointPoint> points, const JointFitOptions& options = {});

// Aggregates per-(N, k) means over groups of a single-method, single-domain
// slice and fits the joint law.
JointFit fit_joint(const MeasurementTable& slice, const JointFitOptions& options = {});

enum class OffsetSharing { PerDomain, Shared };

struct DomainJointFit {
  std::string domain;
  JointFit fit;
};

// One joint fit per domain. Shared mode searches a single b0 for all domains
// that minimizes the summed weighted SSE.
std::vector<DomainJointFit> fit_joint_by_domain(const MeasurementTable& slice, const JointFitOptions& options,
                                                OffsetSharing sharing);

// ---------------------------------------------------------------------------
// Variance fits: per-(N, k) sample variance across groups, same joint form,
// unweighted.

std::vector<JointPoint> cell_variances(const MeasurementTable& slice);
JointFit fit_variance(std::span<const JointPoint> variances);
JointFit fit_variance(const MeasurementTable& slice);

// ---------------------------------------------------------------------------
// Order dispersion: Std(k) = c0 + c1 / (k + b), b on the grid 0, 0.05, ..., 2.

struct DispersionParams {
  double floor = 0.0;      // c0
  double amplitude = 0.0;  // c1 >= 0
  double offset = 0.0;     // b in [0, 2]
};

struct DispersionFit {
  DispersionParams params;
  double r_squared = 0.0;
  double sse = 0.0;
  std::vector<CurvePoint> points;
  std::vector<double> residuals;

  double predict(double k) const { return params.floor + params.amplitude / (k + params.offset); }
};

DispersionFit fit_dispersion(std::span<const CurvePoint> std_by_k);

void to_json(nlohmann::json& j, const DispersionParams& p);
void from_json(const nlohmann::json& j, DispersionParams& p);
nlohmann::json to_report_json(const CurveFit& fit);
nlohmann::json to_report_json(const JointFit& fit);
nlohmann::json to_report_json(const DispersionFit& fit);

}  // namespace mergelaw
