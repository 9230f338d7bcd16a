#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mergelaw/measurements.hpp"
#include "mergelaw/trajectory.hpp"

namespace mergelaw {

// Header names of the long-format results file. k is never read from a
// column; it is derived from the model field.
struct ColumnMapping {
  std::string model = "model";
  std::string domain = "domain";
  std::string ce = "ce_loss";
  std::string size = "N";         // optional column
  std::string method = "method";  // optional column
};

struct IngestConfig {
  ColumnMapping columns;
  std::optional<double> size;          // used when the size column is absent
  std::optional<std::string> method;   // used when the method column is absent
  char delimiter = ',';

  // {"columns": {"model": "...", "domain": "...", "ce": "...", "size": "...",
  //  "method": "..."}, "size": 32, "method": "dare", "delimiter": ","}
  static IngestConfig from_json(const nlohmann::json& j);
};

struct IngestResult {
  MeasurementTable table;  // group = model string, one row per (order, domain)
  std::vector<Trajectory> trajectories;
  std::vector<std::string> warnings;
};

// Donor labels of a hyphen-joined model field ("algebra-code" -> {algebra, code}).
std::vector<std::string> split_model(std::string_view model);
// Hyphen count + 1.
int k_from_model(std::string_view model);

// Splits one CSV record honouring double quotes.
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

IngestResult ingest_csv(std::istream& in, const IngestConfig& config = {});
IngestResult ingest(const std::filesystem::path& path, const IngestConfig& config = {});

// Rebuilds incremental-merge trajectories from orders whose every prefix is
// present in the table (same method and N). Only maximal orders are kept.
std::vector<Trajectory> reconstruct_trajectories(const MeasurementTable& table);

}  // namespace mergelaw
