#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affdim/spatial.hpp"

namespace affdim {

/// Finite point set in R^n with the resolution at which it stands in for its
/// ideal (usually fractal) set. Coordinates are stored row major.
struct PointCloud {
  int n = 0;
  std::vector<double> coords;
  double gen_scale = 0.0;

  std::size_t size() const { return n > 0 ? coords.size() / static_cast<std::size_t>(n) : 0; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * static_cast<std::size_t>(n),
                                                   static_cast<std::size_t>(n));
  }
  void push(std::span<const double> y) { coords.insert(coords.end(), y.begin(), y.end()); }
};

/// Throws std::invalid_argument unless the cloud is nonempty, has n in [1, 8],
/// a whole number of points, finite coordinates and gen_scale > 0.
void validate_cloud(const PointCloud& cloud);

/// Euclidean diagonal of the axis-aligned bounding box.
double bounding_diameter(const PointCloud& cloud);

/// Median distance from a point to its nearest other point; 0 for a single
/// point or when every point is duplicated.
double median_nearest_spacing(const PointCloud& cloud);

enum class SeriesKind { box_count, neighborhood_volume, tube_mass };

const char* series_kind_name(SeriesKind kind);
SeriesKind parse_series_kind(const char* name);

struct ScaleEntry {
  double epsilon = 0.0;
  double value = 0.0;
};

/// Scale-indexed measurements, epsilon strictly decreasing.
struct ScaleSeries {
  std::vector<ScaleEntry> entries;
  SeriesKind kind = SeriesKind::box_count;
};

struct FitWindow {
  double eps_max = 0.0;
  double eps_min = 0.0;
};

struct FitResult {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  FitWindow window;
  std::size_t used = 0;
};

/// Number of occupied origin-anchored half-open cubes [i eps, (i + 1) eps)^n.
/// Throws std::invalid_argument when eps < cloud.gen_scale.
std::uint64_t box_count(const PointCloud& cloud, double epsilon);

ScaleSeries box_count_series(const PointCloud& cloud, std::span<const double> epsilons);

/// Least squares fit of log value against log(1/eps) over the entries with
/// eps in [window.eps_min, window.eps_max]. For box counts the exponent is the
/// slope (a dimension); for volume-like kinds it is minus the slope, i.e. the
/// power p in value ~ eps^p. Throws std::invalid_argument with fewer than 3
/// usable entries.
FitResult dimension_fit(const ScaleSeries& series, FitWindow window);

/// Lower end: the smallest dyadic scale >= 4 gen_scale. Upper end: a quarter
/// of the diameter, capped at `octaves` doublings above the lower end.
FitWindow default_fit_window(const PointCloud& cloud, int octaves);

/// Dyadic scales 2^-m inside the window, decreasing.
std::vector<double> dyadic_scales(FitWindow window);

/// Box counts over dyadic_scales(default_fit_window) followed by a fit.
FitResult fit_box_dimension(const PointCloud& cloud, int octaves);

/// Range of dyadic radius levels j (radius 2^-j), inclusive.
struct LevelRange {
  int j_min = 1;
  int j_max = 12;
};

/// Greedy cover of the cloud by closed balls centred at cloud points with radii
/// 2^-j, j in levels; each step takes the ball with the largest ratio of newly
/// covered points to (2r)^alpha. A point is covered by a ball only when the
/// ball contains the point's resolution ball of radius gen_scale / 2. Returns
/// sum (2 r_i)^alpha, an upper estimate of the alpha-dimensional Hausdorff
/// content of the union of resolution balls.
double hausdorff_content(const PointCloud& cloud, double alpha, LevelRange levels);

/// Volume of the union of grid cells of side grid_res whose centres lie at
/// distance < delta from some point of the cloud. Requires
/// grid_res <= delta / 4 and delta >= gen_scale.
double neighborhood_volume(const PointCloud& cloud, double delta, double grid_res);

/// Membership in the open delta-neighbourhood of a cloud, with the same
/// arithmetic as the cell counts below. Keeps a pointer to the cloud.
class NeighborhoodQuery {
 public:
  NeighborhoodQuery(const PointCloud& cloud, double delta);
  bool contains(const double* y) const;
  double delta() const { return delta_; }

 private:
  const PointCloud* cloud_;
  double delta_;
  double delta2_;
  BucketIndex index_;
};

/// Integer cell count behind neighborhood_volume. With `also`, counts only the
/// cells whose centres also lie in that query's neighbourhood.
std::uint64_t neighborhood_cell_count(const PointCloud& cloud, double delta, double grid_res,
                                      const NeighborhoodQuery* also = nullptr);

struct CoveringCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

/// Compares N(cloud, 2 delta) delta^n with the delta-neighbourhood volume
/// (grid_res = delta / 4); ok when lhs <= 5^n rhs.
CoveringCheck covering_volume_check(const PointCloud& cloud, double delta);

}  // namespace affdim
