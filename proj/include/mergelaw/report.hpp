#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergelaw/fitting.hpp"
#include "mergelaw/measurements.hpp"
#include "mergelaw/planner.hpp"
#include "mergelaw/scaling_law.hpp"
#include "mergelaw/theory_sim.hpp"
#include "mergelaw/trajectory.hpp"

namespace mergelaw::report {

enum class Format { Csv, Json };

// Numbers are printed with this many significant digits everywhere.
inline constexpr int kDigits = 6;

std::string format_number(double x);
double round_significant(double x, int digits = kDigits);
// Rounds every floating-point leaf.
nlohmann::json rounded(const nlohmann::json& j);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  // Array of objects; cells that parse as numbers are emitted as numbers.
  nlohmann::json to_json() const;
};

// Long-format plot data: one row per (series, x, y).
struct SeriesPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

Table series_table(const std::vector<SeriesPoint>& points);

// CE vs k for each N (fitted), floors and tails vs N.
std::vector<SeriesPoint> joint_series(const JointFit& fit, int k_max = 16);
std::vector<SeriesPoint> curve_series(const CurveFit& fit, int k_max = 16);
std::vector<SeriesPoint> variance_series(const JointFit& fit, int k_max = 16);
std::vector<SeriesPoint> dispersion_series(const DispersionFit& fit);
std::vector<SeriesPoint> fractional_return_series(const std::string& name, const FractionalReturn& r);

Table sim_table(const SimResult& result);
Table dispersion_table(const DispersionTable& d);
Table synergy_table(const SynergyMatrix& s);
Table permutation_table(const std::vector<Permutation>& perms);
// Canonical long format: model, domain, ce_loss, N, method.
Table measurement_table(const MeasurementTable& t);

std::string dump(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_table(const std::filesystem::path& path, const Table& t, Format format);

}  // namespace mergelaw::report
