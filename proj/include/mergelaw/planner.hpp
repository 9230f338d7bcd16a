#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergelaw/fitting.hpp"
#include "mergelaw/scaling_law.hpp"

namespace mergelaw {

// Three (k, CE) measurements; the canonical grid is k = 1, 2, 4.
struct ThreePointInput {
  std::array<CurvePoint, 3> samples{};

  static ThreePointInput canonical(double l1, double l2, double l4);
  bool is_canonical() const;
};

// Closed-form inversion on {1, 2, 4}; falls back to a constrained grid fit
// with b in [0, 10] when the algebraic offset is negative, or for other grids.
// Throws NumericalError("curve not in diminishing-returns regime") when the
// triple is not strictly decreasing in k.
CurveParams three_point_fit(const ThreePointInput& input);

enum class KStarRule {
  RelativeGain,  // (L(k) - L(k+1)) / L(k) < delta
  AbsoluteGain,  // L(k) - L(k+1) < delta
};

std::string describe_rule(KStarRule rule, double delta);

// Smallest k >= 1 whose next-expert gain on the fitted curve falls below
// delta, capped at k_max.
int recommend_k(const CurveParams& p, double delta, int k_max, KStarRule rule = KStarRule::RelativeGain);

struct PlanReport {
  CurveParams fitted;
  std::vector<CurvePoint> forecast;
  int k_star = 1;
  int k_epsilon = 1;
  double delta = 0.01;
  double epsilon = 0.01;
  KStarRule rule = KStarRule::RelativeGain;
};

PlanReport plan(const ThreePointInput& input, double delta, double epsilon, int k_min, int k_max,
                KStarRule rule = KStarRule::RelativeGain);

nlohmann::json to_report_json(const PlanReport& report);

}  // namespace mergelaw
