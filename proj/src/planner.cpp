#include "mergelaw/planner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mergelaw/error.hpp"

namespace mergelaw {

ThreePointInput ThreePointInput::canonical(double l1, double l2, double l4) {
  return ThreePointInput{{CurvePoint{1.0, l1}, CurvePoint{2.0, l2}, CurvePoint{4.0, l4}}};
}

bool ThreePointInput::is_canonical() const {
  auto s = samples;
  std::sort(s.begin(), s.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.k < b.k; });
  return s[0].k == 1.0 && s[1].k == 2.0 && s[2].k == 4.0;
}

CurveParams three_point_fit(const ThreePointInput& input) {
  auto s = input.samples;
  std::sort(s.begin(), s.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.k < b.k; });
  for (const auto& p : s) {
    if (!(p.value > 0.0)) throw InputError("three-point input needs positive CE values");
  }
  if (s[0].k == s[1].k || s[1].k == s[2].k) throw InputError("three-point input needs distinct k");
  if (!(s[0].value > s[1].value && s[1].value > s[2].value)) {
    throw NumericalError("curve not in diminishing-returns regime: CE must strictly decrease in k");
  }

  if (input.is_canonical()) {
    const double d12 = s[0].value - s[1].value;
    const double d24 = s[1].value - s[2].value;
    const double r = d12 / d24;
    if (r > 0.5) {
      double b = (4.0 - 2.0 * r) / (2.0 * r - 1.0);
      if (b > -1e-12) b = std::max(b, 0.0);  // round-off around b = 0
      if (b >= 0.0) {
        const double a = d12 * (1.0 + b) * (2.0 + b);
        return CurveParams{s[0].value - a / (1.0 + b), a, b};
      }
    }
  }

  CurveFitOptions options;
  options.weights = WeightMode::Uniform;
  options.offset_max = 10.0;
  return fit_curve(s, options).params;
}

std::string describe_rule(KStarRule rule, double delta) {
  std::ostringstream os;
  if (rule == KStarRule::RelativeGain) {
    os << "k* = min{k >= 1 : (L(k) - L(k+1)) / L(k) < " << delta << "} on the fitted curve, capped at k_max";
  } else {
    os << "k* = min{k >= 1 : L(k) - L(k+1) < " << delta << "} on the fitted curve, capped at k_max";
  }
  return os.str();
}

int recommend_k(const CurveParams& p, double delta, int k_max, KStarRule rule) {
  if (!(delta > 0.0)) throw InputError("delta must be > 0");
  if (k_max < 1) throw InputError("k_max must be >= 1");
  for (int k = 1; k < k_max; ++k) {
    const double gain = marginal_gain(p, k);
    const double stat = rule == KStarRule::RelativeGain ? gain / eval_curve(p, k) : gain;
    if (stat < delta) return k;
  }
  return k_max;
}

PlanReport plan(const ThreePointInput& input, double delta, double epsilon, int k_min, int k_max,
                KStarRule rule) {
  if (k_min < 1 || k_max < k_min) throw InputError("plan needs 1 <= k_min <= k_max");
  PlanReport report;
  report.fitted = three_point_fit(input);
  for (int k = k_min; k <= k_max; ++k) report.forecast.push_back({double(k), eval_curve(report.fitted, k)});
  report.k_star = recommend_k(report.fitted, delta, k_max, rule);
  report.k_epsilon = experts_to_floor(report.fitted.amplitude, report.fitted.offset, epsilon);
  report.delta = delta;
  report.epsilon = epsilon;
  report.rule = rule;
  return report;
}

nlohmann::json to_report_json(const PlanReport& report) {
  nlohmann::json j;
  j["fitted"] = report.fitted;
  j["k_star"] = report.k_star;
  j["k_epsilon"] = report.k_epsilon;
  j["delta"] = report.delta;
  j["epsilon"] = report.epsilon;
  j["rule"] = report.rule == KStarRule::RelativeGain ? "relative" : "absolute";
  j["rule_description"] = describe_rule(report.rule, report.delta);
  auto& f = j["forecast"] = nlohmann::json::array();
  for (const auto& p : report.forecast) f.push_back({{"k", static_cast<int>(p.k)}, {"L", p.value}});
  return j;
}

}  // namespace mergelaw
