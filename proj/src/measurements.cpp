#include "mergelaw/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "mergelaw/error.hpp"

namespace mergelaw {

namespace {

auto key_of(const Measurement& m) { return std::tie(m.method, m.size, m.k, m.domain, m.group); }

}  // namespace

void MeasurementTable::add(Measurement m) {
  if (!(m.ce > 0.0) || !std::isfinite(m.ce)) throw InputError("measurement ce must be a positive finite value");
  if (m.k < 1) throw InputError("measurement k must be >= 1");
  if (!(m.size > 0.0)) throw InputError("measurement N must be > 0");
  for (const auto& r : rows_) {
    if (key_of(r) == key_of(m)) {
      throw InputError("duplicate measurement for group '" + m.group + "' domain '" + m.domain + "'");
    }
  }
  rows_.push_back(std::move(m));
}

MeasurementTable MeasurementTable::filter(const std::optional<std::string>& method,
                                          const std::optional<std::string>& domain,
                                          const std::optional<double>& size) const {
  MeasurementTable out;
  for (const auto& r : rows_) {
    if (method && r.method != *method) continue;
    if (domain && r.domain != *domain) continue;
    if (size && r.size != *size) continue;
    out.rows_.push_back(r);
  }
  return out;
}

std::vector<std::string> MeasurementTable::methods() const {
  std::set<std::string> s;
  for (const auto& r : rows_) s.insert(r.method);
  return {s.begin(), s.end()};
}

std::vector<std::string> MeasurementTable::domains() const {
  std::set<std::string> s;
  for (const auto& r : rows_) s.insert(r.domain);
  return {s.begin(), s.end()};
}

std::vector<double> MeasurementTable::sizes() const {
  std::set<double> s;
  for (const auto& r : rows_) s.insert(r.size);
  return {s.begin(), s.end()};
}

MeasurementTable MeasurementTable::macro(const std::string& label) const {
  struct Acc {
    int k = 1;
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::tuple<std::string, double, std::string>, Acc> groups;
  for (const auto& r : rows_) {
    auto& a = groups[{r.method, r.size, r.group}];
    a.k = r.k;
    a.sum += r.ce;
    ++a.n;
  }
  MeasurementTable out;
  for (const auto& [key, a] : groups) {
    const auto& [method, size, group] = key;
    out.rows_.push_back(Measurement{method, size, a.k, label, group, a.sum / static_cast<double>(a.n)});
  }
  return out;
}

std::vector<CellStats> cell_statistics(const MeasurementTable& table) {
  std::map<std::pair<double, int>, std::vector<double>> cells;
  for (const auto& r : table.rows()) cells[{r.size, r.k}].push_back(r.ce);

  std::vector<CellStats> out;
  for (auto& [key, values] : cells) {
    std::sort(values.begin(), values.end());  // order-independent sums
    CellStats s;
    s.size = key.first;
    s.k = key.second;
    s.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.front() == values.back()) {
      s.mean = values.front();
    } else if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.variance = ss / static_cast<double>(values.size() - 1);
    }
    s.stddev = std::sqrt(s.variance);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.range = *hi - *lo;
    s.cv = s.stddev / s.mean;
    out.push_back(s);
  }
  return out;
}

}  // namespace mergelaw
