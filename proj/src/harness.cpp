#include "affdim/harness.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "affdim/constructions.hpp"
#include "affdim/parallel.hpp"
#include "affdim/spatial.hpp"
#include "affdim/tube.hpp"

namespace affdim {

namespace {

void check_clouds(const WeightedFamily& family, std::span<const PointCloud> clouds) {
  if (family.planes.size() != family.weights.size()) {
    throw std::invalid_argument("family planes and weights differ in length");
  }
  if (clouds.size() != family.size()) {
    throw std::invalid_argument("need exactly one cloud per plane");
  }
  if (family.size() == 0) throw std::invalid_argument("empty family");
  const int n = family.planes.front().ambient().n;
  for (const auto& c : clouds) {
    if (c.size() > 0 && c.n != n) throw std::invalid_argument("cloud dimension differs from the family");
  }
  for (double w : family.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
  }
}

double cloud_volume(const PointCloud& cloud, double delta, double grid_res) {
  if (cloud.size() == 0) return 0.0;
  return neighborhood_volume(cloud, delta, grid_res);
}

std::vector<double> cloud_volumes(const WeightedFamily& family, std::span<const PointCloud> clouds,
                                  double delta, double grid_res) {
  std::vector<double> v(family.size(), 0.0);
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (family.weights[i] != 0.0) v[i] = cloud_volume(clouds[i], delta, grid_res);
  }
  return v;
}

bool clouds_inside(std::span<const PointCloud> clouds, const DomainBox& box) {
  for (const auto& c : clouds) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!box.inner_contains(c.point(i))) return false;
    }
  }
  return true;
}

// Separation certificates apply when every tube stays inside the window.
bool can_skip_separated(std::span<const PointCloud> clouds, double delta, const DomainBox* inner) {
  return inner != nullptr && delta <= inner->delta0() && clouds_inside(clouds, *inner);
}

struct Bounds {
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
};

Bounds bounds_of(const PointCloud& c) {
  Bounds b;
  b.lo.fill(INFINITY);
  b.hi.fill(-INFINITY);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto p = c.point(i);
    for (int d = 0; d < c.n; ++d) {
      b.lo[d] = std::min(b.lo[d], p[d]);
      b.hi[d] = std::max(b.hi[d], p[d]);
    }
  }
  return b;
}

}  // namespace

double inverse_square_tail(int m) {
  if (m < 1) throw std::invalid_argument("tail index must be at least 1");
  double head = 0.0;
  for (int l = m - 1; l >= 1; --l) head += 1.0 / (static_cast<double>(l) * l);
  return std::numbers::pi * std::numbers::pi / 6.0 - head;
}

int minimal_cover_level(double epsilon, double delta0) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
  for (int m = 1; m < 64; ++m) {
    if (inverse_square_tail(m) < epsilon && std::ldexp(1.0, -m + 1) <= delta0) return m;
  }
  throw std::invalid_argument("no cover level below 64 satisfies epsilon and delta0");
}

int radius_level(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("radius must be positive");
  int l = static_cast<int>(std::floor(1.0 - std::log2(r)));
  while (!(r <= std::ldexp(1.0, -l + 1))) ++l;
  while (!(r > std::ldexp(1.0, -l))) --l;
  return l;
}

void validate_cover(const CoverSpec& cover) {
  if (cover.n < 1 || cover.n > kMaxDim) throw std::invalid_argument("cover dimension out of range");
  if (cover.M < 1) throw std::invalid_argument("M must be at least 1");
  const double r_max = std::ldexp(1.0, -cover.M);
  for (const auto& b : cover.balls) {
    if (static_cast<int>(b.centre.size()) != cover.n) throw std::invalid_argument("ball centre dimension");
    if (!(b.radius > 0.0) || b.radius > r_max) {
      throw std::invalid_argument("cover radii must lie in (0, 2^-M]");
    }
  }
}

CoverSpec single_scale_cover(const PointCloud& cloud, int level, int M) {
  validate_cloud(cloud);
  CoverSpec cover;
  cover.n = cloud.n;
  cover.M = M;
  const double r = std::ldexp(1.0, -level + 1);
  const double side = 2.0 * r / std::sqrt(static_cast<double>(cloud.n));
  const BucketIndex index(cloud.n, cloud.coords, side);
  cover.balls.reserve(index.cell_count());
  for (std::size_t c = 0; c < index.cell_count(); ++c) {
    const CellKey& key = index.cell_key(c);
    Ball b;
    b.radius = r;
    b.centre.resize(static_cast<std::size_t>(cloud.n));
    for (int d = 0; d < cloud.n; ++d) b.centre[d] = (static_cast<double>(key[d]) + 0.5) * side;
    cover.balls.push_back(std::move(b));
  }
  validate_cover(cover);
  return cover;
}

namespace {

// mask[i] = 1 when point i lies in a closed ball of level l.
void mark_level(const PointCloud& cloud, const CoverSpec& cover, int l, std::vector<char>& mask) {
  std::vector<double> centres;
  std::vector<double> radii;
  for (const auto& b : cover.balls) {
    if (radius_level(b.radius) != l) continue;
    centres.insert(centres.end(), b.centre.begin(), b.centre.end());
    radii.push_back(b.radius);
  }
  if (radii.empty() || cloud.size() == 0) return;
  if (cloud.n != cover.n) throw std::invalid_argument("cloud and cover dimensions differ");
  const double reach = std::ldexp(1.0, -l + 1);
  const BucketIndex index(cover.n, centres, reach);
  const int n = cloud.n;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mask[i]) continue;
    const auto y = cloud.point(i);
    mask[i] = index.any_near(y, reach, [&](std::uint32_t j) {
      const double* c = centres.data() + static_cast<std::size_t>(j) * n;
      double s = 0.0;
      for (int d = 0; d < n; ++d) s += (y[d] - c[d]) * (y[d] - c[d]);
      return s <= radii[j] * radii[j];
    });
  }
}

PointCloud apply_mask(const PointCloud& cloud, const std::vector<char>& mask) {
  PointCloud out;
  out.n = cloud.n;
  out.gen_scale = cloud.gen_scale;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mask[i]) out.push(cloud.point(i));
  }
  return out;
}

}  // namespace

PointCloud restrict_to_level(const PointCloud& cloud, const CoverSpec& cover, int l) {
  std::vector<char> mask(cloud.size(), 0);
  mark_level(cloud, cover, l, mask);
  return apply_mask(cloud, mask);
}

PointCloud restrict_to_inner(const PointCloud& cloud, const DomainBox& box) {
  PointCloud out;
  out.n = cloud.n;
  out.gen_scale = cloud.gen_scale;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (box.inner_contains(cloud.point(i))) out.push(cloud.point(i));
  }
  return out;
}

LevelRange content_levels(const PointCloud& cloud) {
  if (!(cloud.gen_scale > 0.0)) throw std::invalid_argument("gen_scale must be positive");
  LevelRange range;
  range.j_min = 1;
  range.j_max = std::max(1, static_cast<int>(std::floor(std::log2(2.0 / cloud.gen_scale))));
  return range;
}

ScaleSelection select_scale(const CoverSpec& cover, const WeightedFamily& family,
                            std::span<const PointCloud> clouds, double alpha, double epsilon) {
  validate_cover(cover);
  check_clouds(family, clouds);
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const std::size_t count = family.size();

  int finest = cover.M;
  std::vector<int> levels;
  for (const auto& b : cover.balls) levels.push_back(radius_level(b.radius));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (!levels.empty()) finest = std::max(finest, levels.back());

  auto content_of = [&](const PointCloud& c) {
    return c.size() == 0 ? 0.0 : hausdorff_content(c, alpha, content_levels(c));
  };

  ScaleSelection out;
  out.cover_content.assign(count, 0.0);
  out.precondition_ok = true;
  for (std::size_t i = 0; i < count; ++i) {
    // cloud ∩ B: points in any ball of the cover.
    std::vector<char> mask(clouds[i].size(), 0);
    for (int l : levels) mark_level(clouds[i], cover, l, mask);
    const PointCloud in_cover = apply_mask(clouds[i], mask);
    out.cover_content[i] = content_of(in_cover);
    out.precondition_ok = out.precondition_ok && out.cover_content[i] >= epsilon;
  }

  for (int l = cover.M; l <= finest; ++l) {
    if (!std::binary_search(levels.begin(), levels.end(), l)) continue;
    const double floor_l = 1.0 / (static_cast<double>(l) * l);
    std::vector<double> content(count, 0.0);
    std::vector<std::size_t> members;
    double mass = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const PointCloud part = restrict_to_level(clouds[i], cover, l);
      content[i] = part.size() == clouds[i].size() && clouds[i].size() > 0 ? out.cover_content[i]
                                                                           : content_of(part);
      if (content[i] >= floor_l) {
        members.push_back(i);
        mass += family.weights[i];
      }
    }
    if (mass >= floor_l) {
      out.found = true;
      out.l = l;
      out.members = members;
      out.mass = mass;
      out.level_content = std::move(content);
      out.family.target_s = family.target_s;
      out.family.depth = family.depth;
      out.family.resolution = family.resolution;
      for (std::size_t i : members) {
        out.family.planes.push_back(family.planes[i]);
        out.family.weights.push_back(family.weights[i]);
      }
      out.note = "content from the greedy upper estimator; threshold passes are conservative";
      return out;
    }
  }
  out.note =
      "no level qualified; the content estimator is an upper bound, so this is estimator slack "
      "or a genuine failure";
  return out;
}

double tube_mass(const WeightedFamily& family, std::span<const PointCloud> clouds, double delta,
                 double grid_res) {
  check_clouds(family, clouds);
  double total = 0.0;
  const auto volumes = cloud_volumes(family, clouds, delta, grid_res);
  for (std::size_t i = 0; i < family.size(); ++i) total += family.weights[i] * volumes[i];
  return total;
}

namespace {

PairMass pairwise_mass_with(const WeightedFamily& family, std::span<const PointCloud> clouds,
                            std::span<const double> volumes, double delta, double grid_res,
                            std::uint64_t samples, std::uint64_t seed, const DomainBox* inner) {
  if (samples == 0) throw std::invalid_argument("samples must be positive");
  const std::size_t count = family.size();
  const int n = family.planes.front().ambient().n;
  const bool skip = can_skip_separated(clouds, delta, inner);
  const SlopeBound bound = derive_slope_bound(family);

  std::vector<std::unique_ptr<NeighborhoodQuery>> queries(count);
  std::vector<Bounds> boxes(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (clouds[i].size() == 0 || family.weights[i] == 0.0) continue;
    queries[i] = std::make_unique<NeighborhoodQuery>(clouds[i], delta);
    boxes[i] = bounds_of(clouds[i]);
  }

  PairMass out;
  double value = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!queries[i]) continue;
    value += family.weights[i] * family.weights[i] * volumes[i];
  }

  // Upper-triangle pairs in row order; the pair index seeds the sampler.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) pairs.emplace_back(i, j);
  }
  struct Term {
    double estimate = 0.0;
    double std_error = 0.0;
    bool sampled = false;
    bool separated = false;
  };
  std::vector<Term> terms(pairs.size());
  const double cell_volume = std::pow(grid_res, n);

  parallel_for(pairs.size(), [&](std::size_t idx) {
    const auto [i, j] = pairs[idx];
    Term& t = terms[idx];
    if (!queries[i] || !queries[j]) return;
    if (skip && separation_test(family.planes[i], family.planes[j], delta, bound)) {
      t.separated = true;
      return;
    }
    std::array<std::int64_t, kMaxDim> g_lo{};
    std::array<std::int64_t, kMaxDim> g_count{};
    double cells = 1.0;
    for (int d = 0; d < n; ++d) {
      const double lo = std::max(boxes[i].lo[d], boxes[j].lo[d]) - delta;
      const double hi = std::min(boxes[i].hi[d], boxes[j].hi[d]) + delta;
      const auto a = static_cast<std::int64_t>(std::ceil(lo / grid_res - 0.5));
      const auto b = static_cast<std::int64_t>(std::floor(hi / grid_res - 0.5));
      if (b < a) return;
      g_lo[d] = a;
      g_count[d] = b - a + 1;
      cells *= static_cast<double>(g_count[d]);
    }
    t.sampled = true;
    Engine engine(derive_seed(seed, idx));
    std::uint64_t hits = 0;
    std::array<double, kMaxDim> y{};
    for (std::uint64_t s = 0; s < samples; ++s) {
      for (int d = 0; d < n; ++d) {
        auto g = static_cast<std::int64_t>(uniform01(engine) * static_cast<double>(g_count[d]));
        g = std::min(g, g_count[d] - 1);
        y[d] = (static_cast<double>(g_lo[d] + g) + 0.5) * grid_res;
      }
      if (queries[i]->contains(y.data()) && queries[j]->contains(y.data())) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    const double region = cells * cell_volume;
    t.estimate = region * p;
    t.std_error = region * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  });

  double var = 0.0;
  for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
    const auto [i, j] = pairs[idx];
    const double w = 2.0 * family.weights[i] * family.weights[j];
    value += w * terms[idx].estimate;
    var += (w * terms[idx].std_error) * (w * terms[idx].std_error);
    out.pairs_sampled += terms[idx].sampled ? 1 : 0;
    out.pairs_separated += terms[idx].separated ? 1 : 0;
  }
  out.value = value;
  out.std_error = std::sqrt(var);
  return out;
}

}  // namespace

PairMass pairwise_mass(const WeightedFamily& family, std::span<const PointCloud> clouds,
                       double delta, double grid_res, std::uint64_t samples, std::uint64_t seed,
                       const DomainBox* inner) {
  check_clouds(family, clouds);
  const auto volumes = cloud_volumes(family, clouds, delta, grid_res);
  return pairwise_mass_with(family, clouds, volumes, delta, grid_res, samples, seed, inner);
}

PointCloud weighted_union(const WeightedFamily& family, std::span<const PointCloud> clouds) {
  check_clouds(family, clouds);
  PointCloud out;
  out.n = family.planes.front().ambient().n;
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (family.weights[i] == 0.0 || clouds[i].size() == 0) continue;
    out.coords.insert(out.coords.end(), clouds[i].coords.begin(), clouds[i].coords.end());
    out.gen_scale = std::max(out.gen_scale, clouds[i].gen_scale);
  }
  return out;
}

CauchySchwarzReport cauchy_schwarz_report(const WeightedFamily& family,
                                          std::span<const PointCloud> clouds, double delta,
                                          double grid_res, std::uint64_t samples,
                                          std::uint64_t seed, double tolerance,
                                          const DomainBox* inner) {
  CauchySchwarzReport r;
  r.tolerance = tolerance;
  check_clouds(family, clouds);
  const auto volumes = cloud_volumes(family, clouds, delta, grid_res);
  for (std::size_t i = 0; i < family.size(); ++i) r.tube_mass += family.weights[i] * volumes[i];
  r.lhs2 = r.tube_mass * r.tube_mass;
  const PointCloud f = weighted_union(family, clouds);
  r.f_vol = f.size() == 0 ? 0.0 : neighborhood_volume(f, delta, grid_res);
  const PairMass pm =
      pairwise_mass_with(family, clouds, volumes, delta, grid_res, samples, seed, inner);
  r.pair_mass = pm.value;
  r.pair_std_error = pm.std_error;
  r.ok = r.lhs2 <= r.f_vol * (r.pair_mass + tolerance * r.pair_std_error);
  return r;
}

ShellDecomposition shell_decomposition(const WeightedFamily& family,
                                       std::span<const PointCloud> clouds, std::size_t pivot,
                                       double delta, double grid_res, double frostman_c,
                                       double shell_cap, const DomainBox* inner) {
  check_clouds(family, clouds);
  if (pivot >= family.size()) throw std::invalid_argument("pivot index out of range");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const Ambient a = family.planes.front().ambient();
  const double s = family.target_s;
  const bool skip = can_skip_separated(clouds, delta, inner);
  const SlopeBound bound = derive_slope_bound(family);
  const AffinePlane& p0 = family.planes[pivot];

  ShellDecomposition out;
  out.pivot = pivot;
  out.delta = delta;
  double diam = 0.0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    for (std::size_t j = i + 1; j < family.size(); ++j) {
      diam = std::max(diam, code_metric(family.planes[i], family.planes[j]));
    }
  }
  out.shell_limit = diam > delta ? static_cast<int>(std::ceil(std::log2(diam / delta))) : 0;

  std::vector<int> shell_of(family.size(), 0);
  int top = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double d = code_metric(p0, family.planes[i]);
    int j = 0;
    if (d > delta) {
      j = static_cast<int>(std::ceil(std::log2(d / delta)));
      while (!(d <= std::ldexp(delta, j))) ++j;
      while (j > 1 && d <= std::ldexp(delta, j - 1)) --j;
    }
    shell_of[i] = j;
    top = std::max(top, j);
  }

  out.shells.resize(static_cast<std::size_t>(top) + 1);
  for (int j = 0; j <= top; ++j) {
    ShellReport& r = out.shells[static_cast<std::size_t>(j)];
    r.j = j;
    r.r_lo = j == 0 ? 0.0 : std::ldexp(delta, j - 1);
    r.r_hi = std::ldexp(delta, j);
  }

  const PointCloud& pc = clouds[pivot];
  for (std::size_t i = 0; i < family.size(); ++i) {
    ShellReport& r = out.shells[static_cast<std::size_t>(shell_of[i])];
    r.planes += 1;
    r.mass += family.weights[i];
    if (pc.size() == 0 || clouds[i].size() == 0 || family.weights[i] == 0.0) continue;
    if (i != pivot && skip && separation_test(p0, family.planes[i], delta, bound)) continue;
    std::uint64_t cells = 0;
    if (i == pivot) {
      cells = neighborhood_cell_count(pc, delta, grid_res);
    } else {
      const NeighborhoodQuery other(clouds[i], delta);
      cells = neighborhood_cell_count(pc, delta, grid_res, &other);
    }
    r.intersection_mass += family.weights[i] * static_cast<double>(cells) * std::pow(grid_res, a.n);
  }

  for (auto& r : out.shells) {
    if (r.j == 0) {
      r.bound = r.mass * std::pow(delta, a.codim());
    } else {
      r.bound = r.mass * std::pow(delta, a.codim() + 1) / (std::ldexp(delta, r.j - 1) + delta);
    }
    r.bound_ok = r.intersection_mass <= shell_cap * r.bound;
    r.frostman_bound = frostman_c * std::pow(std::ldexp(delta, r.j + 1), s);
    r.frostman_ok = r.mass <= r.frostman_bound;
    out.total_mass += r.mass;
  }
  return out;
}

AdeResult ade_from_volumes(Ambient ambient, int l, std::span<const ScaleEntry> volumes, double alpha,
                           double s, double floor) {
  if (l < 1) throw std::invalid_argument("scale level must be at least 1");
  std::vector<ScaleEntry> vs(volumes.begin(), volumes.end());
  std::sort(vs.begin(), vs.end(), [](const ScaleEntry& x, const ScaleEntry& y) { return x.epsilon > y.epsilon; });
  vs.erase(std::unique(vs.begin(), vs.end(),
                       [](const ScaleEntry& x, const ScaleEntry& y) { return x.epsilon == y.epsilon; }),
           vs.end());
  if (vs.size() < 4) throw std::invalid_argument("ade_check needs at least 4 delta levels");
  for (const auto& v : vs) {
    if (!(v.epsilon > 0.0 && v.epsilon < 1.0)) throw std::invalid_argument("delta levels must lie in (0, 1)");
  }
  AdeResult out;
  out.floor = floor;
  out.predicted_exponent = ambient.n - (2.0 * alpha - ambient.k + s);
  const double l8 = std::pow(static_cast<double>(l), 8);
  ScaleSeries series;
  series.kind = SeriesKind::neighborhood_volume;
  out.min_q = INFINITY;
  for (const auto& v : vs) {
    AdeLevel lv;
    lv.delta = v.epsilon;
    lv.f_vol = v.value;
    lv.q = lv.f_vol * l8 * std::log(1.0 / lv.delta) / std::pow(lv.delta, out.predicted_exponent);
    out.min_q = std::min(out.min_q, lv.q);
    out.levels.push_back(lv);
    series.entries.push_back(v);
  }
  out.fit = dimension_fit(series, FitWindow{vs.front().epsilon, vs.back().epsilon});
  out.pass = out.min_q > floor;
  return out;
}

AdeResult ade_check(const WeightedFamily& family, std::span<const PointCloud> clouds, int l,
                    std::span<const double> deltas, double alpha, double s, double floor) {
  check_clouds(family, clouds);
  std::vector<double> ds(deltas.begin(), deltas.end());
  std::sort(ds.begin(), ds.end(), std::greater<>());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  if (ds.size() < 4) throw std::invalid_argument("ade_check needs at least 4 delta levels");
  for (double d : ds) {
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("delta levels must lie in (0, 1)");
  }
  const PointCloud f = weighted_union(family, clouds);
  if (f.size() == 0) throw std::invalid_argument("ade_check needs a nonempty union");
  std::vector<ScaleEntry> volumes;
  for (double d : ds) volumes.push_back({d, neighborhood_volume(f, d, d / 4.0)});
  return ade_from_volumes(family.planes.front().ambient(), l, volumes, alpha, s, floor);
}

L2Report run_l2_chain(const WeightedFamily& family, const L2Settings& settings) {
  validate_family(family);
  const Ambient a = family.planes.front().ambient();
  std::vector<double> deltas = settings.deltas;
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
  if (deltas.empty()) throw std::invalid_argument("no delta levels");
  if (deltas.front() > settings.delta0) throw std::invalid_argument("delta levels must not exceed delta0");

  L2Report out;
  std::vector<PointCloud> subsets;
  subsets.reserve(family.size());
  for (const auto& p : family.planes) {
    subsets.push_back(plane_subset_cantor(p, settings.alpha, settings.subset_depth));
  }
  PointCloud all;
  all.n = a.n;
  for (const auto& c : subsets) {
    all.coords.insert(all.coords.end(), c.coords.begin(), c.coords.end());
    all.gen_scale = std::max(all.gen_scale, c.gen_scale);
  }
  out.M = minimal_cover_level(settings.epsilon, settings.delta0);
  out.cover_level = out.M + 1;
  const CoverSpec cover = single_scale_cover(all, out.cover_level, out.M);
  out.cover_balls = cover.balls.size();
  all = PointCloud{};

  out.selection = select_scale(cover, family, subsets, settings.alpha, settings.epsilon);
  out.frostman_c = frostman_constant(family, family.target_s);
  if (!out.selection.found) return out;

  const DomainBox box(a, settings.delta0);
  const WeightedFamily& sub = out.selection.family;
  std::vector<PointCloud> clouds;
  clouds.reserve(sub.size());
  for (std::size_t i : out.selection.members) {
    clouds.push_back(restrict_to_inner(restrict_to_level(subsets[i], cover, out.selection.l), box));
  }
  subsets.clear();

  std::vector<std::size_t> pivots = settings.pivots;
  if (pivots.empty()) {
    pivots.push_back(0);
    if (sub.size() > 1) pivots.push_back(sub.size() / 2);
  }

  out.cs_ok = true;
  out.shells_ok = true;
  ScaleSeries tube_series;
  tube_series.kind = SeriesKind::tube_mass;
  ScaleSeries pair_series;
  pair_series.kind = SeriesKind::tube_mass;
  std::vector<ScaleEntry> volumes;
  for (std::size_t li = 0; li < deltas.size(); ++li) {
    const double delta = deltas[li];
    L2Level lv;
    lv.delta = delta;
    lv.cs = cauchy_schwarz_report(sub, clouds, delta, delta / 4.0, settings.samples,
                                  derive_seed(settings.seed, li), settings.cs_tolerance, &box);
    out.cs_ok = out.cs_ok && lv.cs.ok;
    for (std::size_t p : pivots) {
      if (p >= sub.size()) throw std::invalid_argument("pivot index out of range");
      lv.shells.push_back(shell_decomposition(sub, clouds, p, delta, delta / 4.0, out.frostman_c,
                                              settings.shell_cap, &box));
      for (const auto& r : lv.shells.back().shells) out.shells_ok = out.shells_ok && r.bound_ok;
    }
    tube_series.entries.push_back({delta, lv.cs.tube_mass});
    pair_series.entries.push_back({delta, lv.cs.pair_mass});
    volumes.push_back({delta, lv.cs.f_vol});
    out.levels.push_back(std::move(lv));
  }
  if (deltas.size() >= 3) {
    const FitWindow w{deltas.front(), deltas.back()};
    out.tube_fit = dimension_fit(tube_series, w);
    out.pair_fit = dimension_fit(pair_series, w);
  }
  if (deltas.size() >= 4) {
    out.ade = ade_from_volumes(a, out.selection.l, volumes, settings.alpha, family.target_s,
                               settings.ade_floor);
  }
  return out;
}

}  // namespace affdim
