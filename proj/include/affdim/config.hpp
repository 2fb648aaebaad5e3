#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affdim {

/// Run-level parameters shared by every pipeline. The text form is a flat
/// `key = value` file whose keys are the field names below; the CLI mirrors
/// each key as a flag (underscores become hyphens).
struct RunConfig {
  int n = 2;
  int k = 1;
  /// Dimension of the subset carried by each plane.
  double alpha = 1.0;
  /// Dimension of the family of planes.
  double s = 1.0;
  /// Loss exponent; the target is u = 2 alpha - k + s - gamma.
  double gamma = 0.1;
  int depth = 6;
  int subset_depth = 8;
  /// Dyadic delta levels 2^-j for j in [delta_level_min, delta_level_max].
  int delta_level_min = 5;
  int delta_level_max = 7;
  double delta0 = 0.03125;
  std::uint64_t samples = 1000;
  /// Random plane pairs per ambient in the geometry suite.
  std::uint64_t pairs = 200;
  std::uint64_t seed = 0;
  /// Lattice side for neighbourhood volumes; 0 means delta / 4 at each level.
  double grid_res = 0.0;
  /// Content floor for the scale selection.
  double epsilon = 0.2;
  double gengeo_cap = 8.0;
  double shell_cap = 4.0;
  double cs_tolerance = 3.0;
  double ade_floor = 1e5;
  /// Allowed gap between a fitted dimension and the value it is tested against.
  double dim_tolerance = 0.15;
  int octaves = 3;
  /// Distance for the distance-r sets.
  double r = 0.5;
  /// Skeleton centres per axis.
  int centres = 32;
  /// Grid level of the continuous factor in the axis-parallel counterexample.
  int grid_level = 10;
  std::string output_root = "runs";
};

struct ConfigViolation {
  std::string key;
  std::string message;
};

/// Every key in serialization order.
const std::vector<std::string>& config_keys();

/// Sets one field from its text form. Throws std::invalid_argument naming the
/// key for unknown keys and malformed values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Value of one field in the same text form that set_config_value reads.
std::string config_value(const RunConfig& config, std::string_view key);

/// `key = value` lines in config_keys order; doubles use the shortest form
/// that parses back to the same value.
std::string config_to_text(const RunConfig& config);

/// Parses the flat text form on top of `base`. Blank lines and lines starting
/// with '#' are skipped. Errors carry the line number.
RunConfig parse_config_text(std::string_view text, RunConfig base = {});

RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// FNV-1a 64 of the canonical text without output_root, as 16 hex digits.
/// Output location does not change results, so it does not change the hash.
std::string config_hash(const RunConfig& config);

/// Empty iff every downstream precondition is satisfiable; each entry names
/// the parameter and the constraint it breaks.
std::vector<ConfigViolation> validate_config(const RunConfig& config);

/// Delta levels 2^-j, coarsest first.
std::vector<double> config_deltas(const RunConfig& config);

/// grid_res when set, otherwise delta / 4.
double grid_for(const RunConfig& config, double delta);

/// FNV-1a 64 of a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace affdim
