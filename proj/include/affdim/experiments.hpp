#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "affdim/config.hpp"
#include "affdim/dimension.hpp"
#include "json.hpp"

namespace affdim {

using Json = nlohmann::ordered_json;

/// One registered check: value compared against the bound it was tested with.
struct Assertion {
  std::string criterion;
  bool passed = false;
  double value = 0.0;
  /// "<=", ">=" or "within"; for "within" the bound is the centre and
  /// tolerance the half-width.
  std::string relation;
  double bound = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// A numeric table written as CSV.
struct Series {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct ExperimentResult {
  std::string name;
  Json results = Json::object();
  std::vector<Assertion> assertions;
  std::vector<Series> series;

  bool passed() const;
  /// Criteria of the failed assertions, in order.
  std::vector<std::string> failures() const;
};

/// geometry-suite, sharpness, furstenberg, skeleton, distance-r,
/// counterexample, l2-suite.
const std::vector<std::string>& experiment_names();

/// validate_config plus the constraints of the named pipeline. Throws
/// std::invalid_argument for unknown names.
std::vector<ConfigViolation> experiment_violations(const std::string& name, const RunConfig& config);

/// Runs the pipeline. Throws std::invalid_argument for an unknown name or an
/// invalid config (every violation listed in the message). The result depends
/// only on (name, config), not on the worker count.
ExperimentResult run_experiment(const std::string& name, const RunConfig& config);

/// Report with stable key order: experiment, config hash, config, results,
/// assertions, passed.
Json report_json(const ExperimentResult& result, const RunConfig& config);

/// report_json dumped with two-space indentation and a trailing newline.
std::string report_text(const ExperimentResult& result, const RunConfig& config);

/// Comma separated, header row, LF endings, shortest round-trip doubles.
std::string series_csv(const Series& series);

/// Creates <root>/<name>/run-NNNN with the next free number (never reusing an
/// existing directory) and writes report.json, config.txt, one CSV per series
/// and manifest.json listing every file with its size and FNV-1a hash.
std::filesystem::path write_run(const ExperimentResult& result, const RunConfig& config);

/// Writes a new file; throws std::runtime_error if it exists already.
void write_new_file(const std::filesystem::path& path, const std::string& content);

/// Cloud built by a construction pipeline (sharpness, furstenberg, skeleton,
/// distance-r, counterexample) from the config.
PointCloud build_cloud(const std::string& kind, const RunConfig& config);

/// Header x0..x{n-1}, one point per row.
std::string cloud_csv(const PointCloud& cloud);

/// Reads cloud_csv output (a header row is skipped when it is not numeric).
/// gen_scale <= 0 selects the median nearest-neighbour spacing.
PointCloud parse_cloud_csv(std::string_view text, double gen_scale);

/// Shortest round-trip text of a double.
std::string format_number(double v);

}  // namespace affdim
