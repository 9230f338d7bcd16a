#include "mergelaw/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mergelaw/error.hpp"

namespace mergelaw::report {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", kDigits, x == 0.0 ? 0.0 : x);
  return buf;
}

double round_significant(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

nlohmann::json rounded(const nlohmann::json& j) {
  if (j.is_number_float()) return round_significant(j.get<double>());
  if (j.is_array() || j.is_object()) {
    nlohmann::json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = rounded(*it);
    return out;
  }
  return j;
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

nlohmann::json Table::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < header.size() && i < r.size(); ++i) {
      double v = 0.0;
      const auto* end = r[i].data() + r[i].size();
      auto [ptr, ec] = std::from_chars(r[i].data(), end, v);
      if (!r[i].empty() && ec == std::errc{} && ptr == end) {
        obj[header[i]] = v;
      } else {
        obj[header[i]] = r[i];
      }
    }
    out.push_back(std::move(obj));
  }
  return out;
}

Table series_table(const std::vector<SeriesPoint>& points) {
  Table t{{"series", "x", "y"}, {}};
  for (const auto& p : points) t.rows.push_back({p.series, format_number(p.x), format_number(p.y)});
  return t;
}

std::vector<SeriesPoint> joint_series(const JointFit& fit, int k_max) {
  std::vector<double> sizes;
  for (const auto& p : fit.points) {
    if (std::find(sizes.begin(), sizes.end(), p.size) == sizes.end()) sizes.push_back(p.size);
  }
  std::sort(sizes.begin(), sizes.end());
  std::vector<SeriesPoint> out;
  for (double n : sizes) {
    const std::string label = "N=" + format_number(n);
    for (const auto& p : fit.points) {
      if (p.size == n) out.push_back({"observed " + label, p.k, p.value});
    }
    for (int k = 1; k <= k_max; ++k) out.push_back({"fit " + label, double(k), fit.predict(n, k)});
  }
  for (double n : sizes) out.push_back({"floor", n, fit.params.floor_at(n)});
  for (double n : sizes) out.push_back({"tail", n, fit.params.amplitude_at(n)});
  return out;
}

std::vector<SeriesPoint> curve_series(const CurveFit& fit, int k_max) {
  std::vector<SeriesPoint> out;
  for (const auto& p : fit.points) out.push_back({"observed", p.k, p.value});
  for (int k = 1; k <= k_max; ++k) out.push_back({"fit", double(k), fit.predict(k)});
  return out;
}

std::vector<SeriesPoint> variance_series(const JointFit& fit, int k_max) {
  auto out = joint_series(fit, k_max);
  for (auto& p : out) p.series = "variance " + p.series;
  return out;
}

std::vector<SeriesPoint> dispersion_series(const DispersionFit& fit) {
  std::vector<SeriesPoint> out;
  for (const auto& p : fit.points) out.push_back({"observed std", p.k, p.value});
  for (const auto& p : fit.points) out.push_back({"fit std", p.k, fit.predict(p.k)});
  return out;
}

std::vector<SeriesPoint> fractional_return_series(const std::string& name, const FractionalReturn& r) {
  std::vector<SeriesPoint> out;
  for (std::size_t i = 0; i < r.ratio.size(); ++i) out.push_back({name, double(i + 1), r.ratio[i]});
  return out;
}

Table sim_table(const SimResult& result) {
  Table t{{"k", "mean", "var", "se_mean", "se_var", "trials"}, {}};
  for (const auto& r : result.records) {
    t.rows.push_back({std::to_string(r.k), format_number(r.mean), format_number(r.variance),
                      format_number(r.se_mean), format_number(r.se_variance), std::to_string(r.trials)});
  }
  return t;
}

Table dispersion_table(const DispersionTable& d) {
  Table t{{"N", "k", "orders", "mean", "std", "range", "cv"}, {}};
  for (const auto& c : d.cells) {
    t.rows.push_back({format_number(c.size), std::to_string(c.k), std::to_string(c.count), format_number(c.mean),
                      format_number(c.stddev), format_number(c.range), format_number(c.cv)});
  }
  return t;
}

Table synergy_table(const SynergyMatrix& s) {
  Table t{{"donor", "receiver", "mean_gain", "count"}, {}};
  for (std::size_t i = 0; i < s.donors.size(); ++i) {
    for (std::size_t j = 0; j < s.receivers.size(); ++j) {
      const auto n = s.counts[i][j];
      if (n == 0) continue;
      t.rows.push_back({s.donors[i], s.receivers[j], format_number(s.sum[i][j] / double(n)), std::to_string(n)});
    }
  }
  return t;
}

Table permutation_table(const std::vector<Permutation>& perms) {
  Table t{{"index", "order"}, {}};
  for (std::size_t i = 0; i < perms.size(); ++i) {
    std::string joined;
    for (std::size_t j = 0; j < perms[i].size(); ++j) joined += (j ? "-" : "") + perms[i][j];
    t.rows.push_back({std::to_string(i), joined});
  }
  return t;
}

Table measurement_table(const MeasurementTable& table) {
  Table t{{"model", "domain", "ce_loss", "N", "method"}, {}};
  for (const auto& r : table.rows()) {
    t.rows.push_back({r.group, r.domain, format_number(r.ce), format_number(r.size), r.method});
  }
  return t;
}

std::string dump(const nlohmann::json& j) { return rounded(j).dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, dump(j)); }

void write_table(const std::filesystem::path& path, const Table& t, Format format) {
  write_text(path, format == Format::Json ? dump(t.to_json()) : t.to_csv());
}

}  // namespace mergelaw::report
