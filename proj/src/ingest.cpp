#include "mergelaw/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mergelaw/error.hpp"

namespace mergelaw {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

IngestConfig IngestConfig::from_json(const nlohmann::json& j) {
  IngestConfig c;
  try {
    if (j.contains("columns")) {
      const auto& cols = j["columns"];
      c.columns.model = cols.value("model", c.columns.model);
      c.columns.domain = cols.value("domain", c.columns.domain);
      c.columns.ce = cols.value("ce", c.columns.ce);
      c.columns.size = cols.value("size", c.columns.size);
      c.columns.method = cols.value("method", c.columns.method);
    }
    if (j.contains("size")) c.size = j["size"].get<double>();
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("delimiter")) {
      const auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1) throw InputError("delimiter must be a single character");
      c.delimiter = d[0];
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("ingest config: ") + e.what());
  }
  return c;
}

std::vector<std::string> split_model(std::string_view model) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = model.find('-', start);
    out.emplace_back(model.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int k_from_model(std::string_view model) {
  return static_cast<int>(std::count(model.begin(), model.end(), '-')) + 1;
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      fields.push_back(trim(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

IngestResult ingest_csv(std::istream& in, const IngestConfig& config) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV input");
  const auto header = split_csv_line(line, config.delimiter);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto model_col = column(config.columns.model);
  const auto domain_col = column(config.columns.domain);
  const auto ce_col = column(config.columns.ce);
  if (!model_col || !domain_col || !ce_col) {
    throw InputError("missing mapped columns: need '" + config.columns.model + "', '" + config.columns.domain +
                     "' and '" + config.columns.ce + "'");
  }
  const auto size_col = column(config.columns.size);
  const auto method_col = column(config.columns.method);
  if (!size_col && !config.size) throw InputError("no '" + config.columns.size + "' column and no size given");

  struct Row {
    Measurement m;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line, config.delimiter);
    auto field = [&](std::size_t c) -> const std::string& {
      if (c >= f.size()) throw InputError("line " + std::to_string(lineno) + ": too few fields");
      return f[c];
    };
    Measurement m;
    m.group = field(*model_col);
    if (m.group.empty()) throw InputError("line " + std::to_string(lineno) + ": empty model field");
    m.k = k_from_model(m.group);
    m.domain = field(*domain_col);
    const auto ce = parse_double(field(*ce_col));
    if (!ce) throw InputError("line " + std::to_string(lineno) + ": non-numeric CE '" + field(*ce_col) + "'");
    m.ce = *ce;
    if (size_col) {
      auto s = parse_double(field(*size_col));
      if (!s) throw InputError("line " + std::to_string(lineno) + ": non-numeric size");
      m.size = *s;
    } else {
      m.size = *config.size;
    }
    m.method = method_col ? field(*method_col) : config.method.value_or("unknown");
    rows.push_back({std::move(m), lineno});
  }

  // Orders whose domain set differs from the union are dropped.
  std::map<std::tuple<std::string, double, std::string>, std::set<std::string>> domains_by_order;
  std::map<std::pair<std::string, double>, std::set<std::string>> union_by_run;
  for (const auto& r : rows) {
    domains_by_order[{r.m.method, r.m.size, r.m.group}].insert(r.m.domain);
    union_by_run[{r.m.method, r.m.size}].insert(r.m.domain);
  }
  IngestResult result;
  std::set<std::tuple<std::string, double, std::string>> skipped;
  for (const auto& [key, doms] : domains_by_order) {
    const auto& [method, size, group] = key;
    if (doms != union_by_run[{method, size}]) {
      skipped.insert(key);
      result.warnings.push_back("order '" + group + "' (method " + method + ", N " + std::to_string(size) +
                                ") lacks some evaluation domains; skipped");
    }
  }
  for (auto& r : rows) {
    if (skipped.contains({r.m.method, r.m.size, r.m.group})) continue;
    try {
      result.table.add(std::move(r.m));
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(r.line) + ": " + e.what());
    }
  }
  result.trajectories = reconstruct_trajectories(result.table);
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestConfig& config) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return ingest_csv(in, config);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<Trajectory> reconstruct_trajectories(const MeasurementTable& table) {
  using RunKey = std::pair<std::string, double>;
  std::map<RunKey, std::map<std::string, std::map<std::string, double>>> runs;
  for (const auto& r : table.rows()) runs[{r.method, r.size}][r.group][r.domain] = r.ce;

  std::vector<Trajectory> out;
  for (const auto& [_, orders] : runs) {
    for (const auto& [model, ce] : orders) {
      const auto donors = split_model(model);
      if (donors.size() < 2) continue;
      // Maximal: no longer order extends this one.
      const std::string prefix = model + "-";
      const auto next = orders.lower_bound(prefix);
      if (next != orders.end() && next->first.starts_with(prefix)) continue;

      Trajectory tr;
      tr.donors = donors;
      std::string step_model;
      bool complete = true;
      for (std::size_t t = 0; t < donors.size(); ++t) {
        step_model += (t ? "-" : "") + donors[t];
        auto it = orders.find(step_model);
        if (it == orders.end()) {
          complete = false;
          break;
        }
        tr.ce.push_back(it->second);
      }
      if (complete) out.push_back(std::move(tr));
    }
  }
  return out;
}

}  // namespace mergelaw
