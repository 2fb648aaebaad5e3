#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affdim/affine.hpp"
#include "affdim/dimension.hpp"
#include "affdim/family.hpp"

namespace affdim {

struct Ball {
  Point centre;
  double radius = 0.0;
};

/// Countable (here finite) ball cover of a set, together with the minimal
/// dyadic level M the scale selection starts from.
struct CoverSpec {
  int n = 0;
  std::vector<Ball> balls;
  int M = 1;
};

/// sum_{l >= m} 1 / l^2 for m >= 1.
double inverse_square_tail(int m);

/// Smallest M >= 1 with inverse_square_tail(M) < epsilon and 2^{-M+1} <= delta0.
int minimal_cover_level(double epsilon, double delta0);

/// The level l with 2^-l < r <= 2^{-l+1}.
int radius_level(double r);

/// Throws std::invalid_argument unless every centre has n coordinates and
/// every radius lies in (0, 2^-M].
void validate_cover(const CoverSpec& cover);

/// Balls of radius 2^{-level+1} centred at the cells (side 2r / sqrt n) that
/// hold cloud points, so every point sits in a closed ball of the cover.
CoverSpec single_scale_cover(const PointCloud& cloud, int level, int M);

/// Points of the cloud lying in a closed ball of level l (the set B_l).
PointCloud restrict_to_level(const PointCloud& cloud, const CoverSpec& cover, int l);

/// Points of the cloud inside the inner window S'.
PointCloud restrict_to_inner(const PointCloud& cloud, const DomainBox& box);

/// Level range for content estimates on a cloud: radii from 1/2 down to the
/// smallest dyadic radius >= gen_scale / 2.
LevelRange content_levels(const PointCloud& cloud);

struct ScaleSelection {
  bool found = false;
  int l = 0;
  /// Indices into the input family of the planes kept in the sub-family.
  std::vector<std::size_t> members;
  /// The sub-family with the original weights (not renormalized).
  WeightedFamily family;
  double mass = 0.0;
  bool renormalized = false;
  /// Estimated content of cloud ∩ B for each plane, and whether each meets
  /// the epsilon floor.
  std::vector<double> cover_content;
  bool precondition_ok = false;
  /// Estimated content of cloud ∩ B_l per plane at the selected level.
  std::vector<double> level_content;
  std::string note;
};

/// Smallest l >= M for which the planes with estimated content of
/// cloud_P ∩ B_l at least 1 / l^2 carry mass at least 1 / l^2. Levels run up
/// to the finest radius level in the cover; when none qualifies, found is
/// false and the note records that the content estimator is an upper bound.
ScaleSelection select_scale(const CoverSpec& cover, const WeightedFamily& family,
                            std::span<const PointCloud> clouds, double alpha, double epsilon);

/// sum_P mu(P) |N_delta(cloud_P)| on the lattice of side grid_res. Weights
/// may sum to less than 1; empty clouds contribute 0.
double tube_mass(const WeightedFamily& family, std::span<const PointCloud> clouds, double delta,
                 double grid_res);

struct PairMass {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t pairs_sampled = 0;
  std::size_t pairs_separated = 0;
};

/// sum_{P, P'} mu(P) mu(P') |N_delta(cloud_P) ∩ N_delta(cloud_P')|. Diagonal
/// terms are exact lattice counts. Off-diagonal terms draw `samples` lattice
/// cells uniformly from the intersection of the two delta-enlarged bounding
/// boxes, with seed derive_seed(seed, pair index) over the upper triangle.
/// With `inner` given, delta <= delta0 and every cloud inside S', pairs
/// certified by separation_test are skipped.
PairMass pairwise_mass(const WeightedFamily& family, std::span<const PointCloud> clouds,
                       double delta, double grid_res, std::uint64_t samples, std::uint64_t seed,
                       const DomainBox* inner = nullptr);

struct CauchySchwarzReport {
  double tube_mass = 0.0;
  double lhs2 = 0.0;
  double f_vol = 0.0;
  double pair_mass = 0.0;
  double pair_std_error = 0.0;
  double tolerance = 0.0;
  bool ok = false;
};

/// Checks tube_mass^2 <= F_vol (pair_mass + tolerance * stderr), F_vol being
/// the neighbourhood volume of the union of the clouds with positive weight.
CauchySchwarzReport cauchy_schwarz_report(const WeightedFamily& family,
                                          std::span<const PointCloud> clouds, double delta,
                                          double grid_res, std::uint64_t samples,
                                          std::uint64_t seed, double tolerance,
                                          const DomainBox* inner = nullptr);

struct ShellReport {
  /// 0 for E_0 = {d <= delta}; j >= 1 for 2^{j-1} delta < d <= 2^j delta.
  int j = 0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  std::size_t planes = 0;
  double mass = 0.0;
  /// sum over the shell of mu(P') |N(pivot) ∩ N(P')| (exact lattice counts).
  double intersection_mass = 0.0;
  /// mass * delta^{n-k} for j = 0, mass * delta^{n-k+1} / (2^{j-1} delta + delta) else.
  double bound = 0.0;
  bool bound_ok = false;
  /// frostman_c * (2^{j+1} delta)^s: the closed ball of radius 2^j delta
  /// lies in the open ball of twice the radius.
  double frostman_bound = 0.0;
  bool frostman_ok = false;
};

struct ShellDecomposition {
  std::size_t pivot = 0;
  double delta = 0.0;
  std::vector<ShellReport> shells;
  double total_mass = 0.0;
  /// ceil(log2(diam / delta)) with diam the code diameter of the family.
  int shell_limit = 0;
};

/// Partitions the family by code distance to the pivot plane. Empty shells
/// between nonempty ones are reported with zero mass.
ShellDecomposition shell_decomposition(const WeightedFamily& family,
                                       std::span<const PointCloud> clouds, std::size_t pivot,
                                       double delta, double grid_res, double frostman_c,
                                       double shell_cap, const DomainBox* inner = nullptr);

struct AdeLevel {
  double delta = 0.0;
  double f_vol = 0.0;
  /// f_vol * l^8 * log(1/delta) / delta^p with p = n - (2 alpha - k + s).
  double q = 0.0;
};

struct AdeResult {
  std::vector<AdeLevel> levels;
  FitResult fit;
  double predicted_exponent = 0.0;
  double min_q = 0.0;
  double floor = 0.0;
  bool pass = false;
};

/// F is the union of the clouds with positive weight; grid_res = delta / 4 at
/// each level. Requires at least 4 distinct levels in (0, 1).
AdeResult ade_check(const WeightedFamily& family, std::span<const PointCloud> clouds, int l,
                    std::span<const double> deltas, double alpha, double s, double floor);

/// ade_check on precomputed (delta, F_vol) pairs.
AdeResult ade_from_volumes(Ambient ambient, int l, std::span<const ScaleEntry> volumes, double alpha,
                           double s, double floor);

/// Concatenation of the clouds with positive weight; gen_scale is the max.
PointCloud weighted_union(const WeightedFamily& family, std::span<const PointCloud> clouds);

struct L2Settings {
  /// Dimension of the subset generated on each plane.
  double alpha = 1.0;
  int subset_depth = 8;
  double epsilon = 0.2;
  double delta0 = 0.03125;
  /// Delta levels, any order; grid_res = delta / 4 at each.
  std::vector<double> deltas;
  std::uint64_t samples = 1000;
  std::uint64_t seed = 0;
  double cs_tolerance = 3.0;
  double shell_cap = 4.0;
  double ade_floor = 0.0;
  /// Pivot planes for the shell decomposition; empty means first and middle.
  std::vector<std::size_t> pivots;
};

struct L2Level {
  double delta = 0.0;
  CauchySchwarzReport cs;
  std::vector<ShellDecomposition> shells;
};

struct L2Report {
  int M = 0;
  int cover_level = 0;
  std::size_t cover_balls = 0;
  ScaleSelection selection;
  double frostman_c = 0.0;
  std::vector<L2Level> levels;
  /// Power law of the tube mass and of the pair mass in delta.
  FitResult tube_fit;
  FitResult pair_fit;
  AdeResult ade;
  bool cs_ok = false;
  bool shells_ok = false;
};

/// Whole chain on one family: subsets of dimension alpha on every plane, a
/// single-scale cover of their union at level M + 1, scale selection, the
/// restricted clouds cloud_P ∩ B_l ∩ S', then per delta the Cauchy-Schwarz
/// report and shells, and finally ade_check over the deltas.
L2Report run_l2_chain(const WeightedFamily& family, const L2Settings& settings);

}  // namespace affdim
