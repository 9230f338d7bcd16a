#include "mergelaw/scaling_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mergelaw/error.hpp"

namespace mergelaw {

double JointParams::floor_at(double n) const { return irreducible + floor_coef * std::pow(n, -floor_exp); }

double JointParams::amplitude_at(double n) const { return tail_coef * std::pow(n, -tail_exp); }

CurveParams JointParams::curve_at(double n) const { return {floor_at(n), amplitude_at(n), offset}; }

double eval_curve(const CurveParams& p, double k, const std::optional<BoundedTermParams>& extra) {
  double value = p.floor + p.amplitude / (k + p.offset);
  if (extra) value += extra->amplitude * k / (k + extra->saturation);
  return value;
}

double eval_joint(const JointParams& p, double n, double k) {
  return p.floor_at(n) + p.amplitude_at(n) / (k + p.offset);
}

double marginal_gain(const CurveParams& p, double k) {
  return p.amplitude / ((k + p.offset) * (k + 1.0 + p.offset));
}

int experts_to_floor(double amplitude, double offset, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be > 0");
  if (amplitude < 0.0) throw InputError("tail amplitude must be >= 0");
  const double raw = std::ceil(amplitude / epsilon - offset);
  return raw < 1.0 ? 1 : static_cast<int>(raw);
}

int FractionalReturn::k_target(double q) const {
  // Ratios that equal q in exact arithmetic can land a few ulps below it.
  constexpr double slack = 1e-12;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    if (ratio[i] >= q - slack) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(ratio.size());
}

FractionalReturn fractional_return(const std::vector<double>& ce_by_k) {
  if (ce_by_k.size() < 2) throw InputError("fractional return needs at least 2 points");
  FractionalReturn fr;
  fr.envelope.resize(ce_by_k.size());
  std::partial_sum(ce_by_k.begin(), ce_by_k.end(), fr.envelope.begin(),
                   [](double a, double b) { return std::min(a, b); });
  const double first = fr.envelope.front();
  const double total = first - fr.envelope.back();
  fr.ratio.resize(ce_by_k.size());
  for (std::size_t i = 0; i < ce_by_k.size(); ++i) {
    fr.ratio[i] = total > 0.0 ? (first - fr.envelope[i]) / total : 1.0;
  }
  return fr;
}

void to_json(nlohmann::json& j, const CurveParams& p) {
  j = {{"L_inf", p.floor}, {"A", p.amplitude}, {"b", p.offset}};
}

void from_json(const nlohmann::json& j, CurveParams& p) {
  p.floor = j.at("L_inf").get<double>();
  p.amplitude = j.at("A").get<double>();
  p.offset = j.at("b").get<double>();
}

void to_json(nlohmann::json& j, const BoundedTermParams& p) {
  j = {{"D", p.amplitude}, {"q", p.saturation}};
}

void from_json(const nlohmann::json& j, BoundedTermParams& p) {
  p.amplitude = j.at("D").get<double>();
  p.saturation = j.at("q").get<double>();
}

void to_json(nlohmann::json& j, const JointParams& p) {
  j = {{"L_star", p.irreducible}, {"B", p.floor_coef}, {"beta", p.floor_exp},
       {"A0", p.tail_coef},       {"gamma", p.tail_exp}, {"b0", p.offset}};
}

void from_json(const nlohmann::json& j, JointParams& p) {
  p.irreducible = j.at("L_star").get<double>();
  p.floor_coef = j.at("B").get<double>();
  p.floor_exp = j.at("beta").get<double>();
  p.tail_coef = j.at("A0").get<double>();
  p.tail_exp = j.at("gamma").get<double>();
  p.offset = j.at("b0").get<double>();
}

}  // namespace mergelaw
