#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mergelaw {

// One CE measurement of a merged model. group is the subset/order id.
struct Measurement {
  std::string method;
  double size = 0.0;  // N, billions of parameters
  int k = 1;
  std::string domain;
  std::string group;
  double ce = 0.0;
};

class MeasurementTable {
 public:
  // Throws InputError if ce <= 0, k < 1, N <= 0 or the
  // (method, N, k, domain, group) key already exists.
  void add(Measurement m);

  const std::vector<Measurement>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }

  MeasurementTable filter(const std::optional<std::string>& method, const std::optional<std::string>& domain,
                          const std::optional<double>& size = std::nullopt) const;

  std::vector<std::string> methods() const;
  std::vector<std::string> domains() const;
  std::vector<double> sizes() const;

  // One row per (method, N, group) whose ce is the unweighted mean over the
  // domains present for that group; domain is set to `label`.
  MeasurementTable macro(const std::string& label = "macro") const;

 private:
  std::vector<Measurement> rows_;
};

// Across-group statistics of one (N, k) cell.
struct CellStats {
  double size = 0.0;
  int k = 1;
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample (n-1); 0 when count == 1
  double stddev = 0.0;
  double range = 0.0;     // max - min
  double cv = 0.0;        // stddev / mean
};

// Groups rows by (N, k), ordered by N then k. Expects a slice holding a
// single method and domain.
std::vector<CellStats> cell_statistics(const MeasurementTable& table);

}  // namespace mergelaw
