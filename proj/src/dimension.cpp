#include "affdim/dimension.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include "affdim/parallel.hpp"
#include "affdim/spatial.hpp"

namespace affdim {
namespace {

constexpr double kRelSlack = 1e-12;

double dist2(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return d;
}

void require_gen_scale(const PointCloud& cloud, double scale, const char* what) {
  if (scale < cloud.gen_scale * (1.0 - kRelSlack)) {
    throw std::invalid_argument(std::string(what) + " below the cloud generation scale");
  }
}

}  // namespace

void validate_cloud(const PointCloud& cloud) {
  if (cloud.n < 1 || cloud.n > kMaxDim) throw std::invalid_argument("cloud dimension must be in [1, 8]");
  if (cloud.coords.empty()) throw std::invalid_argument("cloud is empty");
  if (cloud.coords.size() % static_cast<std::size_t>(cloud.n) != 0) {
    throw std::invalid_argument("cloud coordinate count is not a multiple of n");
  }
  for (double v : cloud.coords) {
    if (!std::isfinite(v)) throw std::invalid_argument("cloud has non-finite coordinates");
  }
  if (!(cloud.gen_scale > 0.0)) throw std::invalid_argument("cloud gen_scale must be positive");
}

double bounding_diameter(const PointCloud& cloud) {
  if (cloud.size() == 0) return 0.0;
  double d2 = 0.0;
  for (int c = 0; c < cloud.n; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double v = cloud.coords[i * cloud.n + c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    d2 += (hi - lo) * (hi - lo);
  }
  return std::sqrt(d2);
}

double median_nearest_spacing(const PointCloud& cloud) {
  const std::size_t count = cloud.size();
  if (count < 2) return 0.0;
  const double diam = bounding_diameter(cloud);
  if (!(diam > 0.0)) return 0.0;
  const double side = diam / std::pow(static_cast<double>(count), 1.0 / cloud.n);
  const BucketIndex index(cloud.n, cloud.coords, side);
  std::vector<double> nearest(count, 0.0);
  constexpr std::size_t kBlock = 1024;
  parallel_for((count + kBlock - 1) / kBlock, [&](std::size_t block) {
    const std::size_t end = std::min(count, (block + 1) * kBlock);
    for (std::size_t i = block * kBlock; i < end; ++i) {
      const auto y = cloud.point(i);
      for (double radius = side;; radius *= 2.0) {
        double best = std::numeric_limits<double>::infinity();
        index.for_each_near(y, radius, [&](std::uint32_t j) {
          if (j != i) best = std::min(best, dist2(y, cloud.point(j)));
        });
        if (best <= radius * radius) {
          nearest[i] = std::sqrt(best);
          break;
        }
      }
    }
  });
  std::nth_element(nearest.begin(), nearest.begin() + count / 2, nearest.end());
  return nearest[count / 2];
}

const char* series_kind_name(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::box_count: return "box_count";
    case SeriesKind::neighborhood_volume: return "neighborhood_volume";
    case SeriesKind::tube_mass: return "tube_mass";
  }
  return "box_count";
}

SeriesKind parse_series_kind(const char* name) {
  const std::string s(name);
  if (s == "box_count") return SeriesKind::box_count;
  if (s == "neighborhood_volume") return SeriesKind::neighborhood_volume;
  if (s == "tube_mass") return SeriesKind::tube_mass;
  throw std::invalid_argument("unknown series kind '" + s + "'");
}

namespace {

// Sorted distinct cells of side epsilon occupied by the cloud.
std::vector<CellKey> occupied_cells(const PointCloud& cloud, double epsilon) {
  const int n = cloud.n;
  const std::size_t count = cloud.size();
  CellKey lo = cell_of(cloud.point(0), epsilon);
  CellKey hi = lo;
  for (std::size_t i = 1; i < count; ++i) {
    const CellKey k = cell_of(cloud.point(i), epsilon);
    for (int c = 0; c < n; ++c) {
      lo[c] = std::min(lo[c], k[c]);
      hi[c] = std::max(hi[c], k[c]);
    }
  }
  int total_bits = 0;
  std::array<int, kMaxDim> bits{};
  for (int c = 0; c < n; ++c) {
    bits[c] = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(hi[c] - lo[c])));
    total_bits += bits[c];
  }
  std::vector<CellKey> out;
  if (total_bits <= 64) {
    std::vector<std::uint64_t> packed;
    packed.reserve(count);
    std::uint64_t last = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const CellKey k = cell_of(cloud.point(i), epsilon);
      std::uint64_t v = 0;
      for (int c = 0; c < n; ++c) {
        v = (bits[c] == 64 ? 0 : (v << bits[c])) | static_cast<std::uint64_t>(k[c] - lo[c]);
      }
      // Consecutive points usually share a cell; skip the obvious repeats.
      if (i == 0 || v != last) packed.push_back(v);
      last = v;
    }
    std::sort(packed.begin(), packed.end());
    packed.erase(std::unique(packed.begin(), packed.end()), packed.end());
    out.resize(packed.size());
    for (std::size_t i = 0; i < packed.size(); ++i) {
      std::uint64_t v = packed[i];
      CellKey k{};
      for (int c = n - 1; c >= 0; --c) {
        const std::uint64_t mask = bits[c] == 64 ? ~0ULL : ((1ULL << bits[c]) - 1);
        k[c] = lo[c] + static_cast<std::int64_t>(v & mask);
        v = bits[c] == 64 ? 0 : (v >> bits[c]);
      }
      out[i] = k;
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = cell_of(cloud.point(i), epsilon);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void check_box_size(const PointCloud& cloud, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("box size must be positive");
  require_gen_scale(cloud, epsilon, "box size");
}

}  // namespace

std::uint64_t box_count(const PointCloud& cloud, double epsilon) {
  validate_cloud(cloud);
  check_box_size(cloud, epsilon);
  return occupied_cells(cloud, epsilon).size();
}

ScaleSeries box_count_series(const PointCloud& cloud, std::span<const double> epsilons) {
  validate_cloud(cloud);
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    check_box_size(cloud, epsilons[i]);
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw std::invalid_argument("scales must be strictly decreasing");
    }
  }
  ScaleSeries series;
  series.kind = SeriesKind::box_count;
  series.entries.resize(epsilons.size());
  // Work from the finest scale up; when a scale is a power-of-two multiple of
  // the previous one, floor(x / 2^p e) = floor(x / e) >> p exactly, so the
  // coarser cells come from the finer cell list instead of the points.
  std::vector<CellKey> cells;
  double prev = 0.0;
  for (std::size_t r = epsilons.size(); r-- > 0;) {
    const double eps = epsilons[r];
    int shift = 0;
    if (prev > 0.0) {
      int exp = 0;
      const double mant = std::frexp(eps / prev, &exp);
      if (mant == 0.5 && exp >= 2 && std::ldexp(prev, exp - 1) == eps) shift = exp - 1;
    }
    if (shift > 0) {
      for (auto& k : cells) {
        for (int c = 0; c < cloud.n; ++c) k[c] >>= shift;
      }
      std::sort(cells.begin(), cells.end());
      cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    } else {
      cells = occupied_cells(cloud, eps);
    }
    series.entries[r] = {eps, static_cast<double>(cells.size())};
    prev = eps;
  }
  return series;
}

FitResult dimension_fit(const ScaleSeries& series, FitWindow window) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& e : series.entries) {
    if (e.epsilon > window.eps_max * (1.0 + kRelSlack)) continue;
    if (e.epsilon < window.eps_min * (1.0 - kRelSlack)) continue;
    if (!(e.value > 0.0) || !(e.epsilon > 0.0)) continue;
    xs.push_back(-std::log(e.epsilon));
    ys.push_back(std::log(e.value));
  }
  if (xs.size() < 3) {
    throw std::invalid_argument("dimension fit needs at least 3 scales in the window, got " +
                                std::to_string(xs.size()));
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("dimension fit needs distinct scales");
  const double slope = sxy / sxx;
  FitResult fit;
  fit.intercept = my - slope * mx;
  fit.exponent = series.kind == SeriesKind::box_count ? slope : -slope;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - (fit.intercept + slope * xs[i]);
      ss_res += r * r;
    }
    fit.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  } else {
    fit.r2 = 1.0;
  }
  fit.window = window;
  fit.used = xs.size();
  return fit;
}

FitWindow default_fit_window(const PointCloud& cloud, int octaves) {
  validate_cloud(cloud);
  if (octaves < 2) throw std::invalid_argument("fit window needs at least 2 octaves");
  FitWindow w;
  // Smallest dyadic scale at or above 4 gen_scale.
  w.eps_min = std::exp2(std::ceil(std::log2(4.0 * cloud.gen_scale) - 1e-12));
  w.eps_max = std::min(bounding_diameter(cloud) / 4.0, w.eps_min * std::ldexp(1.0, octaves));
  return w;
}

std::vector<double> dyadic_scales(FitWindow window) {
  std::vector<double> out;
  if (!(window.eps_max > 0.0) || !(window.eps_min > 0.0)) return out;
  int m = static_cast<int>(std::ceil(-std::log2(window.eps_max) - 1e-9));
  for (;; ++m) {
    const double eps = std::ldexp(1.0, -m);
    if (eps > window.eps_max * (1.0 + kRelSlack)) continue;
    if (eps < window.eps_min * (1.0 - kRelSlack)) break;
    out.push_back(eps);
  }
  return out;
}

FitResult fit_box_dimension(const PointCloud& cloud, int octaves) {
  const FitWindow w = default_fit_window(cloud, octaves);
  const auto scales = dyadic_scales(w);
  return dimension_fit(box_count_series(cloud, scales), w);
}

double hausdorff_content(const PointCloud& cloud, double alpha, LevelRange levels) {
  if (!(alpha > 0.0)) throw std::invalid_argument("content exponent must be positive");
  validate_cloud(cloud);
  if (levels.j_min < 0 || levels.j_max < levels.j_min || levels.j_max > 60) {
    throw std::invalid_argument("invalid radius level range");
  }
  const std::size_t count = cloud.size();
  const int n_levels = levels.j_max - levels.j_min + 1;
  std::vector<BucketIndex> indexes;
  std::vector<double> radius(n_levels);
  std::vector<double> cost(n_levels);
  for (int l = 0; l < n_levels; ++l) {
    radius[l] = std::ldexp(1.0, -(levels.j_min + l));
    cost[l] = std::pow(2.0 * radius[l], alpha);
    indexes.emplace_back(cloud.n, cloud.coords, radius[l]);
  }
  if (radius[0] < cloud.gen_scale / 2.0) {
    throw std::invalid_argument("largest cover radius is below the cloud resolution");
  }
  std::vector<char> covered(count, 0);

  // A point counts as covered once its resolution ball (radius gen_scale / 2)
  // lies in the cover ball, so the cover also covers the set the cloud
  // stands for and single points cannot be bought at vanishing cost.
  const double half_res = cloud.gen_scale / 2.0;
  auto reach2 = [&](int l) {
    const double reach = radius[l] - half_res;
    return reach < 0.0 ? -1.0 : reach * reach;
  };
  auto gain_count = [&](std::size_t centre, int l) {
    const auto y = cloud.point(centre);
    const double r2 = reach2(l);
    std::size_t hits = 0;
    indexes[l].for_each_near(y, radius[l], [&](std::uint32_t j) {
      if (!covered[j] && dist2(y, cloud.point(j)) <= r2) ++hits;
    });
    return hits;
  };

  struct Candidate {
    double ratio;
    int level;
    std::uint32_t centre;
  };
  // Highest ratio first; ties go to the larger ball, then the lower index.
  auto lower_priority = [](const Candidate& a, const Candidate& b) {
    if (a.ratio != b.ratio) return a.ratio < b.ratio;
    if (a.level != b.level) return a.level > b.level;
    return a.centre > b.centre;
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(lower_priority)> queue(
      lower_priority);

  // Candidate centres per level: one point per cell of side r / 4 when every
  // point of the cell is then within reach, otherwise every point.
  std::vector<std::pair<std::uint32_t, int>> seeds;
  for (int l = 0; l < n_levels; ++l) {
    const double cell = radius[l] / 8.0;
    const double reach = radius[l] - half_res;
    if (cell * std::sqrt(static_cast<double>(cloud.n)) <= reach) {
      const BucketIndex thin(cloud.n, cloud.coords, cell);
      for (std::size_t c = 0; c < thin.cell_count(); ++c) seeds.emplace_back(thin.cell_points(c)[0], l);
    } else {
      for (std::size_t i = 0; i < count; ++i) seeds.emplace_back(static_cast<std::uint32_t>(i), l);
    }
  }
  std::vector<Candidate> initial(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    const auto [centre, l] = seeds[i];
    initial[i] = {static_cast<double>(gain_count(centre, l)) / cost[l], l, centre};
  });
  for (const auto& c : initial) queue.push(c);
  initial.clear();
  initial.shrink_to_fit();

  std::size_t remaining = count;
  double total = 0.0;
  while (remaining > 0 && !queue.empty()) {
    Candidate top = queue.top();
    queue.pop();
    const std::size_t hits = gain_count(top.centre, top.level);
    if (hits == 0) continue;
    top.ratio = static_cast<double>(hits) / cost[top.level];
    if (!queue.empty() && lower_priority(top, queue.top())) {
      queue.push(top);
      continue;
    }
    const auto y = cloud.point(top.centre);
    const double r2 = reach2(top.level);
    indexes[top.level].for_each_near(y, radius[top.level], [&](std::uint32_t j) {
      if (!covered[j] && dist2(y, cloud.point(j)) <= r2) {
        covered[j] = 1;
        --remaining;
      }
    });
    total += cost[top.level];
  }
  return total;
}

NeighborhoodQuery::NeighborhoodQuery(const PointCloud& cloud, double delta)
    : cloud_(&cloud), delta_(delta), delta2_(delta * delta), index_((validate_cloud(cloud), cloud.n), cloud.coords, delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
}

bool NeighborhoodQuery::contains(const double* y) const {
  const int n = cloud_->n;
  const auto within = [&](std::uint32_t j) {
    const double* p = cloud_->coords.data() + static_cast<std::size_t>(j) * n;
    double s = 0.0;
    for (int d = 0; d < n && s < delta2_; ++d) s += (y[d] - p[d]) * (y[d] - p[d]);
    return s < delta2_;
  };
  const std::span<const double> ys(y, static_cast<std::size_t>(n));
  // The point's own cell holds the nearest points in most queries.
  const std::size_t own = index_.find(cell_of(ys, delta_));
  if (own < index_.cell_count()) {
    for (std::uint32_t j : index_.cell_points(own)) {
      if (within(j)) return true;
    }
  }
  return index_.any_near(ys, delta_, within);
}

std::uint64_t neighborhood_cell_count(const PointCloud& cloud, double delta, double grid_res,
                                      const NeighborhoodQuery* also) {
  validate_cloud(cloud);
  if (!(delta > 0.0) || !(grid_res > 0.0)) throw std::invalid_argument("delta and grid_res must be positive");
  if (grid_res > delta / 4.0 * (1.0 + kRelSlack)) {
    throw std::invalid_argument("grid_res must be at most delta / 4");
  }
  require_gen_scale(cloud, delta, "delta");
  const int n = cloud.n;
  const BucketIndex index(n, cloud.coords, delta);
  const double delta2 = delta * delta;

  // Candidate buckets (the 3^n dilation of the occupied ones) are built one
  // slab of the first coordinate at a time, which bounds memory.
  const std::size_t occupied = index.cell_count();
  std::vector<std::int64_t> slabs;
  for (std::size_t c = 0; c < occupied; ++c) {
    const std::int64_t x = index.cell_key(c)[0];
    if (slabs.empty() || slabs.back() != x + 1) {
      for (std::int64_t v = x - 1; v <= x + 1; ++v) {
        if (slabs.empty() || slabs.back() < v) slabs.push_back(v);
      }
    }
  }
  auto first_with_x_at_least = [&](std::int64_t x) {
    std::size_t lo = 0;
    std::size_t hi = occupied;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (index.cell_key(mid)[0] < x) lo = mid + 1; else hi = mid;
    }
    return lo;
  };

  constexpr std::size_t kBlock = 64;
  std::vector<CellKey> candidates;
  std::vector<std::uint64_t> block_counts;
  std::uint64_t grand_total = 0;
  for (const std::int64_t slab : slabs) {
    candidates.clear();
    const std::size_t c_end = first_with_x_at_least(slab + 2);
    for (std::size_t c = first_with_x_at_least(slab - 1); c < c_end; ++c) {
      CellKey base = index.cell_key(c);
      base[0] = slab;
      CellKey off{};
      for (int d = 1; d < n; ++d) off[d] = -1;
      while (true) {
        CellKey key = base;
        for (int d = 1; d < n; ++d) key[d] += off[d];
        candidates.push_back(key);
        int d = 1;
        while (d < n) {
          if (++off[d] <= 1) break;
          off[d] = -1;
          ++d;
        }
        if (d >= n) break;
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const std::size_t blocks = (candidates.size() + kBlock - 1) / kBlock;
    block_counts.assign(blocks, 0);

    parallel_for(blocks, [&](std::size_t block) {
      std::vector<double> near;
      std::array<std::vector<double>, kMaxDim> axis;
      std::vector<char> mask;
      std::uint64_t total = 0;
      const std::size_t end = std::min(candidates.size(), (block + 1) * kBlock);
      for (std::size_t b = block * kBlock; b < end; ++b) {
        const CellKey& bucket = candidates[b];
        near.clear();
        CellKey lo = bucket;
        CellKey hi = bucket;
        for (int d = 0; d < n; ++d) {
          lo[d] -= 1;
          hi[d] += 1;
        }
        // Only points within delta of the bucket box can reach its cell centres;
        // the slack keeps rounding on the safe side.
        index.for_each_in_cells(lo, hi, [&](std::uint32_t j) {
          const auto p = cloud.point(j);
          double gap2 = 0.0;
          for (int d = 0; d < n; ++d) {
            const double b_lo = static_cast<double>(bucket[d]) * delta;
            const double g = p[d] < b_lo ? b_lo - p[d] : std::max(0.0, p[d] - (b_lo + delta));
            gap2 += g * g;
          }
          if (gap2 <= delta2 * (1.0 + 1e-9)) near.insert(near.end(), p.begin(), p.end());
        });
        if (near.empty()) continue;
        const std::size_t near_count = near.size() / n;

        // Grid cell centres (g + 1/2) grid_res assigned to this bucket.
        bool empty_axis = false;
        for (int d = 0; d < n; ++d) {
          axis[d].clear();
          const double start = static_cast<double>(bucket[d]) * delta;
          const auto g_lo = static_cast<std::int64_t>(std::floor(start / grid_res - 0.5)) - 1;
          const auto g_hi = static_cast<std::int64_t>(std::ceil((start + delta) / grid_res)) + 1;
          for (std::int64_t g = g_lo; g <= g_hi; ++g) {
            const double centre = (static_cast<double>(g) + 0.5) * grid_res;
            if (static_cast<std::int64_t>(std::floor(centre / delta)) == bucket[d]) {
              axis[d].push_back(centre);
            }
          }
          empty_axis = empty_axis || axis[d].empty();
        }
        if (empty_axis) continue;

        // Columns along the last axis: the partial distance over the other
        // coordinates is shared by the column's cells. Accumulation order is
        // the same as in NeighborhoodQuery::contains.
        const int last = n - 1;
        const auto& zs = axis[last];
        const std::size_t m = zs.size();
        mask.assign(m, 0);
        std::array<std::size_t, kMaxDim> pos{};
        std::array<double, kMaxDim> y{};
        std::size_t first = 0;
        while (true) {
          for (int d = 0; d < last; ++d) y[d] = axis[d][pos[d]];
          std::fill(mask.begin(), mask.end(), 0);
          std::size_t hits = 0;
          // The next column starts from the first point that hit in this one.
          const std::size_t start = first;
          for (std::size_t step = 0; step < near_count && hits < m; ++step) {
            const std::size_t j = (start + step) % near_count;
            const double* p = near.data() + j * n;
            double sxy = 0.0;
            for (int d = 0; d < last && sxy < delta2; ++d) sxy += (y[d] - p[d]) * (y[d] - p[d]);
            if (!(sxy < delta2)) continue;
            const std::size_t before = hits;
            for (std::size_t z = 0; z < m; ++z) {
              if (mask[z]) continue;
              const double dz = zs[z] - p[last];
              if (sxy + dz * dz < delta2) {
                mask[z] = 1;
                ++hits;
              }
            }
            if (hits > before && before == 0) first = j;
          }
          if (also == nullptr) {
            total += hits;
          } else if (hits > 0) {
            for (std::size_t z = 0; z < m; ++z) {
              y[last] = zs[z];
              if (mask[z] && also->contains(y.data())) ++total;
            }
          }
          int d = 0;
          while (d < last) {
            if (++pos[d] < axis[d].size()) break;
            pos[d] = 0;
            ++d;
          }
          if (d >= last) break;
        }
      }
      block_counts[block] = total;
    });
    for (auto c : block_counts) grand_total += c;
  }
  return grand_total;
}

double neighborhood_volume(const PointCloud& cloud, double delta, double grid_res) {
  const std::uint64_t cells = neighborhood_cell_count(cloud, delta, grid_res);
  return static_cast<double>(cells) * std::pow(grid_res, cloud.n);
}

CoveringCheck covering_volume_check(const PointCloud& cloud, double delta) {
  CoveringCheck out;
  out.lhs = static_cast<double>(box_count(cloud, 2.0 * delta)) * std::pow(delta, cloud.n);
  out.rhs = neighborhood_volume(cloud, delta, delta / 4.0);
  out.ok = out.lhs <= std::pow(5.0, cloud.n) * out.rhs;
  return out;
}

}  // namespace affdim
