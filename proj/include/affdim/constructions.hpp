#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "affdim/affine.hpp"
#include "affdim/dimension.hpp"
#include "affdim/family.hpp"

namespace affdim {

/// Placement of a two-branch Cantor set along one coordinate: the level-0
/// interval is [start, start + length).
struct CantorLayout {
  double start = -0.5;
  double length = 1.0;
};

/// Contraction ratio 2^{-1/s} of the two-branch self-similar set of dimension s.
double cantor_ratio(double s);

/// Midpoints of the 2^depth level-depth intervals, increasing. Each interval
/// has length layout.length * ratio^depth.
std::vector<double> cantor_points(double s, int depth, CantorLayout layout);

/// 2^depth planes whose code coordinate `axis` (index into the flat code)
/// runs over cantor_points(s, depth, layout) while the other coordinates keep
/// the values in `base` (zeros when empty). Uniform weights;
/// resolution = layout.length * ratio^depth.
WeightedFamily cantor_code_family(double s, int axis, int depth, Ambient ambient,
                                  CantorLayout layout = {}, std::vector<double> base = {});

/// max over planes P and radii r = 2^-1 .. 2^-R of mu(B(P, r)) / r^s with
/// open code-metric balls and R = max(1, depth * ceil(1 / s)).
double frostman_constant(const WeightedFamily& family, double s);

/// Self-similar subset of P ∩ S of dimension alpha in (0, k]: floor(alpha)
/// parameter directions on the cell-centred grid of step 2^-depth, one Cantor
/// factor of dimension alpha - floor(alpha) in [0, 1) (depth rounded to
/// depth * (alpha - floor(alpha)), at least 1), remaining parameters fixed at
/// 1 / (k + 1); parameters outside the simplex are dropped.
PointCloud plane_subset_cantor(const AffinePlane& plane, double alpha, int depth);

/// Union of plane_subset_cantor over the family, in plane order.
/// gen_scale = max(component gen_scale, family resolution).
PointCloud union_cloud(const WeightedFamily& family, double alpha, int depth);

/// Parallel k-planes inside {x_{k+2} = ... = x_n = 0}: intercept coordinate 0
/// runs over a Cantor set of dimension s in [-0.4, 0.4), all else zero.
WeightedFamily sharpness_family(double s, int k, int n, int depth);

struct FurstenbergSet {
  PointCloud cloud;
  WeightedFamily family;
};

/// Lines y = a(b) + b t in the plane with slopes b on a Cantor set of
/// dimension s in [0, 1), intercept a(b) = -0.2 - 0.3 b (keeps every line in
/// the window), and an alpha-dimensional subset on each line.
FurstenbergSet furstenberg_cloud(double alpha, double s, int depth);

struct DistanceFamilySpec {
  /// Ambient dimension.
  int n = 2;
  /// Base plane; when empty the base is the point `centre` (k = 0).
  std::optional<AffinePlane> plane;
  Point centre;
  double r = 1.0;
  /// Angular and parameter grid depth.
  int depth = 6;
};

/// Points at distance exactly r from the base: parameter grid over C times a
/// radius-r sphere grid in the normal space (2 points, a 2^{depth+2}-gon, or a
/// Fibonacci sphere with 4^{depth+1} points for normal dimension 1, 2, 3).
PointCloud distance_r_set(const DistanceFamilySpec& spec);

/// Cell-centred grid of per_axis^n centres in [0, 1]^n.
PointCloud grid_centres(int n, int per_axis);

/// Union over centres of a rotated k-skeleton of the unit cube [-1/2, 1/2]^n,
/// each k-face sampled on the cell-centred grid of step 2^-depth. Rotation i
/// is the Q factor of a Gaussian matrix drawn from derive_seed(seed, i).
PointCloud skeleton_union_cloud(int k, int n, const PointCloud& centres, std::uint64_t seed,
                                int depth);

/// [0, 1]^{k+1} on the cell-centred grid of step 2^-grid_level times the
/// rationals p/q in [0, 1) with q <= 2^depth in each of the remaining n-k-1
/// coordinates. Requires n > k + 1.
PointCloud scaled_axis_parallel_counterexample(int n, int k, int depth, int grid_level);

/// Uniform rotation of R^n drawn from the seed (det = +1), row major.
std::vector<double> random_rotation(int n, std::uint64_t seed);

}  // namespace affdim
