#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mergelaw {

// L(k) = floor + amplitude / (k + offset), in nats/token.
struct CurveParams {
  double floor = 0.0;      // L_inf
  double amplitude = 0.0;  // A
  double offset = 0.0;     // b
};

// Extra interference term D * k / (k + q) used for late-k upticks.
struct BoundedTermParams {
  double amplitude = 0.0;   // D
  double saturation = 1.0;  // q
};

// L(N, k) = L* + B N^-beta + A0 N^-gamma / (k + b0), N in billions.
struct JointParams {
  double irreducible = 0.0;     // L*
  double floor_coef = 0.0;      // B
  double floor_exp = 0.0;       // beta
  double tail_coef = 0.0;       // A0
  double tail_exp = 0.0;        // gamma
  double offset = 0.0;          // b0

  double floor_at(double n_billions) const;      // L_inf(N)
  double amplitude_at(double n_billions) const;  // A(N)
  CurveParams curve_at(double n_billions) const;
};

double eval_curve(const CurveParams& p, double k, const std::optional<BoundedTermParams>& extra = std::nullopt);
double eval_joint(const JointParams& p, double n_billions, double k);

// eval_curve(k) - eval_curve(k+1) = A / ((k+b)(k+1+b)).
double marginal_gain(const CurveParams& p, double k);

// max(1, ceil(A/eps - b)): experts needed for the tail to drop below eps.
int experts_to_floor(double amplitude, double offset, double epsilon);

struct FractionalReturn {
  std::vector<double> envelope;  // running minimum, index 0 is k=1
  std::vector<double> ratio;     // R(k)

  // Smallest k with R(k) >= q (to 1e-12). Returns the last k if no point
  // reaches q.
  int k_target(double q) const;
};

// R(k) = (E(1) - E(k)) / (E(1) - E(k_max)) over the monotone envelope E.
// A flat envelope gives R = 1 everywhere.
FractionalReturn fractional_return(const std::vector<double>& ce_by_k);

void to_json(nlohmann::json& j, const CurveParams& p);
void from_json(const nlohmann::json& j, CurveParams& p);
void to_json(nlohmann::json& j, const BoundedTermParams& p);
void from_json(const nlohmann::json& j, BoundedTermParams& p);
void to_json(nlohmann::json& j, const JointParams& p);
void from_json(const nlohmann::json& j, JointParams& p);

}  // namespace mergelaw
