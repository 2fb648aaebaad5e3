#include "affdim/constructions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "affdim/parallel.hpp"
#include "affdim/spatial.hpp"

namespace affdim {
namespace {

void require_s(double s) {
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("dimension s must lie in (0, 1]");
}

std::vector<double> grid_axis(int depth) {
  const std::size_t count = std::size_t{1} << depth;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = (static_cast<double>(i) + 0.5) / count;
  return out;
}

double plane_stretch(const AffinePlane& plane) {
  const auto code = plane.code();
  double sum = 0.0;
  for (std::size_t j = static_cast<std::size_t>(plane.ambient().codim()); j < code.size(); ++j) {
    sum += code[j] * code[j];
  }
  return std::sqrt(1.0 + sum);
}

double gaussian(Engine& engine) {
  // Box-Muller on our own uniforms keeps draws identical across standard libraries.
  const double u1 = 1.0 - uniform01(engine);
  const double u2 = uniform01(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

double cantor_ratio(double s) {
  require_s(s);
  return std::exp2(-1.0 / s);
}

std::vector<double> cantor_points(double s, int depth, CantorLayout layout) {
  if (depth < 0 || depth > 24) throw std::invalid_argument("Cantor depth must be in [0, 24]");
  if (!(layout.length > 0.0)) throw std::invalid_argument("Cantor interval must have positive length");
  const double ratio = cantor_ratio(s);
  std::vector<double> left{layout.start};
  double len = layout.length;
  for (int d = 0; d < depth; ++d) {
    const double child = len * ratio;
    std::vector<double> next;
    next.reserve(left.size() * 2);
    for (double x : left) {
      next.push_back(x);
      next.push_back(x + len - child);
    }
    left = std::move(next);
    len = child;
  }
  for (double& x : left) x += len / 2.0;
  return left;
}

WeightedFamily cantor_code_family(double s, int axis, int depth, Ambient ambient,
                                  CantorLayout layout, std::vector<double> base) {
  require_s(s);
  ambient = make_ambient(ambient.n, ambient.k);
  if (depth < 1) throw std::invalid_argument("Cantor family depth must be at least 1");
  if (axis < 0 || axis >= ambient.code_size()) throw std::invalid_argument("code axis out of range");
  if (base.empty()) base.assign(ambient.code_size(), 0.0);
  if (static_cast<int>(base.size()) != ambient.code_size()) {
    throw std::invalid_argument("base code has the wrong length");
  }
  std::vector<AffinePlane> planes;
  for (double v : cantor_points(s, depth, layout)) {
    std::vector<double> code = base;
    code[axis] = v;
    planes.emplace_back(ambient, std::move(code));
  }
  const double resolution = layout.length * std::pow(cantor_ratio(s), depth);
  return uniform_family(std::move(planes), s, depth, resolution);
}

double frostman_constant(const WeightedFamily& family, double s) {
  validate_family(family);
  if (!(s > 0.0)) throw std::invalid_argument("Frostman exponent must be positive");
  const int levels = std::max(1, family.depth * static_cast<int>(std::ceil(1.0 / s - 1e-12)));
  const std::size_t count = family.size();
  std::vector<double> per_plane(count, 0.0);
  parallel_for(count, [&](std::size_t i) {
    std::vector<std::pair<double, double>> dist(count);
    for (std::size_t j = 0; j < count; ++j) {
      dist[j] = {code_metric(family.planes[i], family.planes[j]), family.weights[j]};
    }
    std::sort(dist.begin(), dist.end());
    std::vector<double> prefix(count + 1, 0.0);
    for (std::size_t j = 0; j < count; ++j) prefix[j + 1] = prefix[j] + dist[j].second;
    double best = 0.0;
    for (int l = 1; l <= levels; ++l) {
      const double r = std::ldexp(1.0, -l);
      const auto it = std::lower_bound(dist.begin(), dist.end(), std::make_pair(r, -1.0));
      const double mass = prefix[static_cast<std::size_t>(it - dist.begin())];
      best = std::max(best, mass / std::pow(r, s));
    }
    per_plane[i] = best;
  });
  return *std::max_element(per_plane.begin(), per_plane.end());
}

PointCloud plane_subset_cantor(const AffinePlane& plane, double alpha, int depth) {
  const Ambient& a = plane.ambient();
  if (!(alpha > 0.0 && alpha <= a.k + 1e-12)) {
    throw std::invalid_argument("subset dimension must lie in (0, k]");
  }
  if (depth < 1 || depth > 24) throw std::invalid_argument("subset depth must be in [1, 24]");
  const int full = std::min(a.k, static_cast<int>(std::floor(alpha + 1e-12)));
  const double frac = alpha - full;
  const bool has_cantor = frac > 1e-12;

  std::vector<std::vector<double>> axes;
  double cell = 0.0;
  for (int i = 0; i < full; ++i) axes.push_back(grid_axis(depth));
  if (full > 0) cell = std::ldexp(1.0, -depth);
  if (has_cantor) {
    const int cdepth = std::max(1, static_cast<int>(std::lround(depth * frac)));
    axes.push_back(cantor_points(frac, cdepth, {0.0, 1.0}));
    cell = std::max(cell, std::pow(cantor_ratio(frac), cdepth));
  }
  const double fixed = 1.0 / (a.k + 1);
  while (static_cast<int>(axes.size()) < a.k) axes.push_back({fixed});

  PointCloud cloud;
  cloud.n = a.n;
  cloud.gen_scale = cell * plane_stretch(plane);
  std::vector<std::size_t> pos(a.k, 0);
  std::vector<double> t(a.k);
  Point y(a.n);
  while (true) {
    double sum = 0.0;
    for (int l = 0; l < a.k; ++l) {
      t[l] = axes[l][pos[l]];
      sum += t[l];
    }
    if (sum <= 1.0) {
      std::copy(t.begin(), t.end(), y.begin());
      plane.graph(t, std::span<double>(y).subspan(a.k));
      cloud.push(y);
    }
    int l = a.k - 1;
    while (l >= 0) {
      if (++pos[l] < axes[l].size()) break;
      pos[l] = 0;
      --l;
    }
    if (l < 0) break;
  }
  if (cloud.coords.empty()) throw std::invalid_argument("plane subset is empty");
  return cloud;
}

PointCloud union_cloud(const WeightedFamily& family, double alpha, int depth) {
  validate_family(family);
  PointCloud out;
  out.n = family.ambient().n;
  out.gen_scale = family.resolution;
  // Batches of planes are generated in parallel and appended in plane order;
  // batching bounds the peak memory to the output plus one batch.
  const std::size_t batch = std::max<std::size_t>(1, worker_count());
  std::vector<PointCloud> parts;
  for (std::size_t first = 0; first < family.size(); first += batch) {
    const std::size_t count = std::min(batch, family.size() - first);
    parts.assign(count, PointCloud{});
    parallel_for(count, [&](std::size_t i) {
      parts[i] = plane_subset_cantor(family.planes[first + i], alpha, depth);
    });
    for (auto& p : parts) {
      out.coords.insert(out.coords.end(), p.coords.begin(), p.coords.end());
      out.gen_scale = std::max(out.gen_scale, p.gen_scale);
      std::vector<double>().swap(p.coords);
    }
  }
  return out;
}

WeightedFamily sharpness_family(double s, int k, int n, int depth) {
  const Ambient a = make_ambient(n, k);
  return cantor_code_family(s, 0, depth, a, {-0.4, 0.8});
}

FurstenbergSet furstenberg_cloud(double alpha, double s, int depth) {
  require_s(s);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const Ambient a{2, 1};
  std::vector<AffinePlane> planes;
  for (double b : cantor_points(s, depth, {0.0, 1.0})) {
    planes.emplace_back(a, std::vector<double>{-0.2 - 0.3 * b, b});
  }
  FurstenbergSet out;
  out.family = uniform_family(std::move(planes), s, depth, std::pow(cantor_ratio(s), depth));
  out.cloud = union_cloud(out.family, alpha, depth);
  return out;
}

PointCloud distance_r_set(const DistanceFamilySpec& spec) {
  if (!(spec.r > 0.0)) throw std::invalid_argument("distance r must be positive");
  if (spec.depth < 1 || spec.depth > 16) throw std::invalid_argument("distance set depth must be in [1, 16]");
  const int n = spec.n;
  const int k = spec.plane ? spec.plane->ambient().k : 0;
  if (spec.plane && spec.plane->ambient().n != n) throw std::invalid_argument("plane ambient mismatch");
  if (!spec.plane && static_cast<int>(spec.centre.size()) != n) {
    throw std::invalid_argument("centre must have n coordinates");
  }
  const int m = n - k;
  if (m < 1 || m > 3) throw std::invalid_argument("normal space dimension must be 1, 2 or 3");

  // Orthonormal basis of the normal space.
  std::vector<double> normals(static_cast<std::size_t>(m) * n, 0.0);
  double stretch = 1.0;
  if (spec.plane) {
    const PlaneFrame frame(*spec.plane);
    for (int i = 0; i < m; ++i) {
      const auto row = frame.normal(i);
      std::copy(row.begin(), row.end(), normals.begin() + i * n);
    }
    stretch = plane_stretch(*spec.plane);
  } else {
    for (int i = 0; i < m; ++i) normals[i * n + i] = 1.0;
  }

  std::vector<std::vector<double>> sphere;
  double sphere_step = 0.0;
  if (m == 1) {
    sphere = {{spec.r}, {-spec.r}};
    sphere_step = 0.0;
  } else if (m == 2) {
    const std::size_t count = std::size_t{1} << (spec.depth + 2);
    for (std::size_t i = 0; i < count; ++i) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / count;
      sphere.push_back({spec.r * std::cos(th), spec.r * std::sin(th)});
    }
    sphere_step = 2.0 * std::numbers::pi * spec.r / count;
  } else {
    const std::size_t count = std::size_t{1} << (2 * spec.depth + 2);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      sphere.push_back({spec.r * rho * std::cos(phi), spec.r * rho * std::sin(phi), spec.r * z});
    }
    sphere_step = spec.r * std::sqrt(4.0 * std::numbers::pi / count);
  }

  std::vector<Point> bases;
  double param_step = 0.0;
  if (spec.plane) {
    const auto axis = grid_axis(spec.depth);
    std::vector<std::size_t> pos(k, 0);
    std::vector<double> t(k);
    while (true) {
      double sum = 0.0;
      for (int l = 0; l < k; ++l) {
        t[l] = axis[pos[l]];
        sum += t[l];
      }
      if (sum <= 1.0) bases.push_back(point_on_plane(*spec.plane, t));
      int l = k - 1;
      while (l >= 0) {
        if (++pos[l] < axis.size()) break;
        pos[l] = 0;
        --l;
      }
      if (l < 0) break;
    }
    param_step = std::ldexp(1.0, -spec.depth) * stretch;
  } else {
    bases.push_back(spec.centre);
  }

  PointCloud cloud;
  cloud.n = n;
  cloud.gen_scale = std::max({param_step, sphere_step, 1e-12});
  Point y(n);
  for (const auto& b : bases) {
    for (const auto& v : sphere) {
      for (int c = 0; c < n; ++c) {
        double off = 0.0;
        for (int i = 0; i < m; ++i) off += v[i] * normals[i * n + c];
        y[c] = b[c] + off;
      }
      cloud.push(y);
    }
  }
  return cloud;
}

PointCloud grid_centres(int n, int per_axis) {
  if (n < 1 || n > kMaxDim || per_axis < 1) throw std::invalid_argument("invalid centre grid");
  PointCloud c;
  c.n = n;
  c.gen_scale = 1.0 / per_axis;
  std::vector<int> pos(n, 0);
  Point y(n);
  while (true) {
    for (int d = 0; d < n; ++d) y[d] = (pos[d] + 0.5) / per_axis;
    c.push(y);
    int d = n - 1;
    while (d >= 0) {
      if (++pos[d] < per_axis) break;
      pos[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return c;
}

std::vector<double> random_rotation(int n, std::uint64_t seed) {
  Engine engine(seed);
  Eigen::MatrixXd g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = gaussian(engine);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < n; ++c) {
    if (rr(c, c) < 0.0) q.col(c) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out[r * n + c] = q(r, c);
  return out;
}

PointCloud skeleton_union_cloud(int k, int n, const PointCloud& centres, std::uint64_t seed,
                                int depth) {
  if (k < 0 || k >= n || n > kMaxDim) throw std::invalid_argument("skeleton needs 0 <= k < n <= 8");
  if (centres.n != n || centres.size() == 0) throw std::invalid_argument("centres must be a nonempty cloud in R^n");
  if (depth < 0 || depth > 16) throw std::invalid_argument("skeleton depth must be in [0, 16]");

  // Sample points of the k-skeleton of [-1/2, 1/2]^n.
  const auto axis = grid_axis(depth);
  std::vector<double> skeleton;
  for (unsigned free_mask = 0; free_mask < (1u << n); ++free_mask) {
    if (std::popcount(free_mask) != k) continue;
    for (unsigned sign_mask = 0; sign_mask < (1u << n); ++sign_mask) {
      if (sign_mask & free_mask) continue;
      std::vector<std::size_t> pos(k, 0);
      while (true) {
        int f = 0;
        for (int c = 0; c < n; ++c) {
          if (free_mask & (1u << c)) {
            skeleton.push_back(axis[pos[f++]] - 0.5);
          } else {
            skeleton.push_back((sign_mask & (1u << c)) ? 0.5 : -0.5);
          }
        }
        int l = k - 1;
        while (l >= 0) {
          if (++pos[l] < axis.size()) break;
          pos[l] = 0;
          --l;
        }
        if (l < 0) break;
      }
    }
  }
  const std::size_t per = skeleton.size() / n;

  std::vector<std::vector<double>> parts(centres.size());
  parallel_for(centres.size(), [&](std::size_t i) {
    const auto rot = random_rotation(n, derive_seed(seed, i));
    const auto centre = centres.point(i);
    auto& out = parts[i];
    out.resize(skeleton.size());
    for (std::size_t p = 0; p < per; ++p) {
      for (int r = 0; r < n; ++r) {
        double v = centre[r];
        for (int c = 0; c < n; ++c) v += rot[r * n + c] * skeleton[p * n + c];
        out[p * n + r] = v;
      }
    }
  });

  PointCloud cloud;
  cloud.n = n;
  for (const auto& p : parts) cloud.coords.insert(cloud.coords.end(), p.begin(), p.end());

  cloud.gen_scale = std::ldexp(1.0, -depth);
  return cloud;
}

PointCloud scaled_axis_parallel_counterexample(int n, int k, int depth, int grid_level) {
  make_ambient(n, k);
  if (n <= k + 1) throw std::invalid_argument("counterexample needs n > k + 1");
  if (depth < 0 || depth > 12) throw std::invalid_argument("rational depth must be in [0, 12]");
  if (grid_level < 1 || grid_level > 14) throw std::invalid_argument("grid level must be in [1, 14]");
  const long q_max = 1L << depth;
  std::vector<double> rationals;
  for (long q = 1; q <= q_max; ++q)
    for (long p = 0; p < q; ++p)
      if (std::gcd(p, q) == 1) rationals.push_back(static_cast<double>(p) / static_cast<double>(q));
  std::sort(rationals.begin(), rationals.end());

  const auto axis = grid_axis(grid_level);
  const int free = k + 1;
  const int rest = n - free;
  PointCloud cloud;
  cloud.n = n;
  cloud.gen_scale = std::ldexp(1.0, -grid_level);
  std::vector<std::size_t> pos(n, 0);
  Point y(n);
  while (true) {
    for (int c = 0; c < free; ++c) y[c] = axis[pos[c]];
    for (int c = 0; c < rest; ++c) y[free + c] = rationals[pos[free + c]];
    cloud.push(y);
    int c = n - 1;
    while (c >= 0) {
      const std::size_t size = c < free ? axis.size() : rationals.size();
      if (++pos[c] < size) break;
      pos[c] = 0;
      --c;
    }
    if (c < 0) break;
  }
  return cloud;
}

}  // namespace affdim
