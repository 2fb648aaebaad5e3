#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "affdim/constructions.hpp"
#include "affdim/harness.hpp"
#include "doctest.h"

using namespace affdim;

namespace {

const Ambient kLine{2, 1};

AffinePlane line(double a0, double b) { return AffinePlane(kLine, {a0, b}); }

// Points (t, a0 + b t) for t on the cell-centred grid of [lo, hi) with the given count.
PointCloud line_cloud(const AffinePlane& p, double lo, double hi, int count) {
  PointCloud c;
  c.n = 2;
  for (int i = 0; i < count; ++i) {
    const double t = lo + (hi - lo) * (i + 0.5) / count;
    c.push(point_on_plane(p, std::span<const double>(&t, 1)));
  }
  c.gen_scale = (hi - lo) / count;
  return c;
}

WeightedFamily pair_family(const AffinePlane& p, const AffinePlane& q) {
  return uniform_family({p, q}, 1.0);
}

double shell_mass_sum(const ShellDecomposition& d) {
  double m = 0.0;
  for (const auto& s : d.shells) m += s.mass;
  return m;
}

}  // namespace

TEST_CASE("inverse square tail and minimal cover level") {
  CHECK(inverse_square_tail(1) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0));
  CHECK(inverse_square_tail(2) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0 - 1.0));
  // tail(10) ~ 0.105, tail(11) ~ 0.095; delta0 = 1 does not bind.
  CHECK(minimal_cover_level(0.1, 1.0) == 11);
  // tail(6) ~ 0.181 < 0.2; delta0 = 2^-5 needs 2^{-M+1} <= 2^-5 as well.
  CHECK(minimal_cover_level(0.2, 0.03125) == 6);
  CHECK(minimal_cover_level(0.2, 0.001) == 11);
  CHECK_THROWS_AS(minimal_cover_level(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("radius levels bracket the radius") {
  CHECK(radius_level(0.5) == 2);
  CHECK(radius_level(0.3) == 2);
  CHECK(radius_level(0.25) == 3);
  CHECK(radius_level(1.0) == 1);
  for (double r : {0.7, 0.125, 0.0999, 1e-3}) {
    const int l = radius_level(r);
    CHECK(std::ldexp(1.0, -l) < r);
    CHECK(r <= std::ldexp(1.0, -l + 1));
  }
  CHECK_THROWS_AS(radius_level(0.0), std::invalid_argument);
}

TEST_CASE("cover validation rejects radii above 2^-M") {
  CoverSpec c;
  c.n = 2;
  c.M = 3;
  c.balls.push_back({{0.0, 0.0}, 0.125});
  CHECK_NOTHROW(validate_cover(c));
  c.balls.push_back({{0.0, 0.0}, 0.2});
  CHECK_THROWS_AS(validate_cover(c), std::invalid_argument);
  c.balls.back() = {{0.0}, 0.1};
  CHECK_THROWS_AS(validate_cover(c), std::invalid_argument);
}

TEST_CASE("single scale cover contains the whole cloud at its level") {
  const PointCloud c = line_cloud(line(0.1, 0.3), 0.0, 1.0, 500);
  const CoverSpec cover = single_scale_cover(c, 7, 6);
  CHECK(cover.M == 6);
  for (const auto& b : cover.balls) CHECK(radius_level(b.radius) == 7);
  CHECK(restrict_to_level(c, cover, 7).size() == c.size());
  CHECK(restrict_to_level(c, cover, 8).size() == 0);
}

TEST_CASE("scale selection on a single scale cover returns that level") {
  // Pigeonhole: all mass sits in B_l for the one level present.
  const auto fam = uniform_family({line(-0.2, 0.1), line(0.0, 0.1), line(0.2, -0.1)}, 1.0);
  std::vector<PointCloud> clouds;
  PointCloud all;
  all.n = 2;
  for (const auto& p : fam.planes) {
    clouds.push_back(line_cloud(p, 0.0, 1.0, 256));
    all.coords.insert(all.coords.end(), clouds.back().coords.begin(), clouds.back().coords.end());
  }
  all.gen_scale = clouds.front().gen_scale;
  const CoverSpec cover = single_scale_cover(all, 7, 6);
  const ScaleSelection sel = select_scale(cover, fam, clouds, 1.0, 0.2);
  REQUIRE(sel.found);
  CHECK(sel.l == 7);
  CHECK(sel.members.size() == 3);
  CHECK(sel.mass == doctest::Approx(1.0));
  CHECK_FALSE(sel.renormalized);
  CHECK(sel.family.weights == fam.weights);
  CHECK(sel.precondition_ok);
}

TEST_CASE("neighbourhood query agrees with the cell count") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int n : {1, 2, 3}) {
    PointCloud a;
    PointCloud b;
    a.n = b.n = n;
    for (int i = 0; i < 12; ++i) {
      std::vector<double> y(n);
      for (auto& v : y) v = u(rng);
      a.push(y);
      for (auto& v : y) v = u(rng) * 0.5;
      b.push(y);
    }
    a.gen_scale = b.gen_scale = 0.01;
    const double delta = 0.1;
    const double h = delta / 4.0;
    const NeighborhoodQuery qa(a, delta);
    const NeighborhoodQuery qb(b, delta);
    // Brute force over a lattice box that holds both neighbourhoods.
    const int lo = static_cast<int>(std::floor(-0.45 / h));
    const int hi = static_cast<int>(std::ceil(0.45 / h));
    std::uint64_t in_a = 0;
    std::uint64_t in_both = 0;
    std::vector<int> g(n, lo);
    std::vector<double> y(n);
    while (true) {
      for (int d = 0; d < n; ++d) y[d] = (g[d] + 0.5) * h;
      if (qa.contains(y.data())) {
        ++in_a;
        if (qb.contains(y.data())) ++in_both;
      }
      int d = 0;
      while (d < n && ++g[d] > hi) g[d++] = lo;
      if (d == n) break;
    }
    CHECK(neighborhood_cell_count(a, delta, h) == in_a);
    CHECK(neighborhood_cell_count(a, delta, h, &qb) == in_both);
    CHECK(neighborhood_cell_count(a, delta, h, &qa) == in_a);
  }
}

TEST_CASE("Cauchy-Schwarz is an equality for one plane") {
  const auto fam = uniform_family({line(0.0, 0.2)}, 1.0);
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 200)};
  const auto r = cauchy_schwarz_report(fam, clouds, 0.03125, 0.03125 / 4, 100, 1, 0.0);
  CHECK(r.f_vol > 0.0);
  CHECK(r.tube_mass == r.f_vol);
  CHECK(r.pair_mass == r.f_vol);
  CHECK(r.pair_std_error == 0.0);
  CHECK(r.ok);
}

TEST_CASE("two far apart copies of a plane") {
  // Translation by 1/2 is a lattice shift, so both tubes have the same count.
  const auto fam = pair_family(line(-0.25, 0.0), line(0.25, 0.0));
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 200),
                                       line_cloud(fam.planes[1], 0.1, 0.9, 200)};
  const double delta = 0.03125;
  const double v = neighborhood_volume(clouds[0], delta, delta / 4);
  CHECK(neighborhood_volume(clouds[1], delta, delta / 4) == v);
  const auto r = cauchy_schwarz_report(fam, clouds, delta, delta / 4, 100, 3, 0.0);
  CHECK(r.tube_mass == v);
  CHECK(r.f_vol == 2.0 * v);
  CHECK(r.pair_mass == v / 2.0);
  CHECK(r.lhs2 == r.f_vol * r.pair_mass);
  CHECK(r.ok);
}

TEST_CASE("separated pairs contribute only their diagonal terms") {
  const auto fam = pair_family(line(-0.2, 0.05), line(0.2, -0.05));
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 300),
                                       line_cloud(fam.planes[1], 0.1, 0.9, 300)};
  const double delta = 0.015625;
  const DomainBox box(kLine, 0.03125);
  const double v1 = neighborhood_volume(clouds[0], delta, delta / 4);
  const double v2 = neighborhood_volume(clouds[1], delta, delta / 4);
  const PairMass pm = pairwise_mass(fam, clouds, delta, delta / 4, 500, 9, &box);
  CHECK(pm.pairs_separated == 1);
  CHECK(pm.pairs_sampled == 0);
  CHECK(pm.value == doctest::Approx(0.25 * (v1 + v2)).epsilon(1e-12));
  // Without the window the pair is sampled and its estimate is still 0.
  const PairMass raw = pairwise_mass(fam, clouds, delta, delta / 4, 500, 9);
  CHECK(raw.pairs_separated == 0);
  CHECK(raw.value == doctest::Approx(0.25 * (v1 + v2)).epsilon(1e-12));
}

TEST_CASE("duplicate plane: Monte Carlo noise needs the tolerance") {
  const auto fam = pair_family(line(0.0, 0.1), line(0.0, 0.1));
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 200),
                                       line_cloud(fam.planes[1], 0.1, 0.9, 200)};
  const double delta = 0.03125;
  int strict_failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto strict = cauchy_schwarz_report(fam, clouds, delta, delta / 4, 400, seed, 0.0);
    const auto tolerant = cauchy_schwarz_report(fam, clouds, delta, delta / 4, 400, seed, 3.0);
    strict_failures += strict.ok ? 0 : 1;
    CHECK(tolerant.ok);
  }
  CHECK(strict_failures > 0);
  CHECK(strict_failures < 20);
}

TEST_CASE("pair mass is deterministic in the seed") {
  const auto fam = uniform_family({line(0.0, 0.1), line(0.01, 0.12), line(0.03, 0.05)}, 1.0);
  std::vector<PointCloud> clouds;
  for (const auto& p : fam.planes) clouds.push_back(line_cloud(p, 0.1, 0.9, 200));
  const auto a = pairwise_mass(fam, clouds, 0.03125, 0.03125 / 4, 300, 5);
  const auto b = pairwise_mass(fam, clouds, 0.03125, 0.03125 / 4, 300, 5);
  const auto c = pairwise_mass(fam, clouds, 0.03125, 0.03125 / 4, 300, 6);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(a.value != c.value);
  CHECK(a.pairs_sampled == 3);
}

TEST_CASE("shell index of a plane at code distance 0.3") {
  // 0.3 / 2^-5 = 9.6 lies in (8, 16], hence j = 4.
  const auto fam = pair_family(line(0.0, 0.0), line(0.3, 0.0));
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 100),
                                       line_cloud(fam.planes[1], 0.1, 0.9, 100)};
  const auto d = shell_decomposition(fam, clouds, 0, 0.03125, 0.03125 / 4, 1.0, 4.0);
  REQUIRE(d.shells.size() == 5);
  CHECK(d.shells[4].planes == 1);
  CHECK(d.shells[4].r_lo == 0.25);
  CHECK(d.shells[4].r_hi == 0.5);
  CHECK(d.shells[0].planes == 1);
  for (int j = 1; j < 4; ++j) CHECK(d.shells[static_cast<std::size_t>(j)].mass == 0.0);
  CHECK(d.shells[4].intersection_mass == 0.0);
  CHECK(d.shell_limit == 4);
}

TEST_CASE("a single pivot plane has only the E0 shell") {
  const auto fam = uniform_family({line(0.1, 0.2)}, 1.0);
  const std::vector<PointCloud> clouds{line_cloud(fam.planes[0], 0.1, 0.9, 200)};
  const double delta = 0.03125;
  const auto d = shell_decomposition(fam, clouds, 0, delta, delta / 4, 1.0, 4.0);
  REQUIRE(d.shells.size() == 1);
  CHECK(d.shells[0].mass == 1.0);
  CHECK(d.total_mass == 1.0);
  CHECK(d.shells[0].intersection_mass == neighborhood_volume(clouds[0], delta, delta / 4));
}

TEST_CASE("shells partition the family mass") {
  const auto fam = sharpness_family(1.0, 1, 2, 5);
  std::vector<PointCloud> clouds;
  for (const auto& p : fam.planes) clouds.push_back(plane_subset_cantor(p, 1.0, 7));
  const double delta = 0.03125;
  for (std::size_t pivot : {std::size_t{0}, fam.size() / 2, fam.size() - 1}) {
    const auto d = shell_decomposition(fam, clouds, pivot, delta, delta / 4, 3.0, 4.0);
    std::size_t planes = 0;
    for (const auto& s : d.shells) planes += s.planes;
    CHECK(planes == fam.size());
    CHECK(d.total_mass == doctest::Approx(1.0));
    CHECK(shell_mass_sum(d) == doctest::Approx(1.0));
  }
}

TEST_CASE("ade check on synthetic power laws") {
  const Ambient a{3, 1};
  std::vector<ScaleEntry> v;
  for (int j = 4; j <= 8; ++j) {
    const double d = std::ldexp(1.0, -j);
    v.push_back({d, 0.7 * d});
  }
  // Predicted exponent n - (2 alpha - k + s) = 3 - (2 - 1 + 1) = 1.
  const auto r = ade_from_volumes(a, 7, v, 1.0, 1.0, 1e3);
  CHECK(r.predicted_exponent == doctest::Approx(1.0));
  CHECK(r.fit.exponent == doctest::Approx(1.0));
  CHECK(r.levels.size() == 5);
  CHECK(r.levels.front().delta > r.levels.back().delta);
  CHECK(r.min_q == doctest::Approx(0.7 * std::pow(7.0, 8) * std::log(16.0)));
  CHECK(r.pass);
  CHECK_FALSE(ade_from_volumes(a, 7, v, 1.0, 1.0, 1e12).pass);
  v.resize(3);
  CHECK_THROWS_AS(ade_from_volumes(a, 7, v, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("content levels follow the resolution") {
  PointCloud c;
  c.n = 1;
  c.coords = {0.0};
  c.gen_scale = 1.0 / 256;
  CHECK(content_levels(c).j_min == 1);
  CHECK(content_levels(c).j_max == 9);
}

TEST_CASE("L2 chain on a small sharpness family") {
  const auto fam = sharpness_family(0.5, 1, 2, 4);
  L2Settings s;
  s.alpha = 1.0;
  s.subset_depth = 7;
  s.deltas = {0.03125, 0.015625, 0.0078125};
  s.samples = 300;
  s.seed = 4;
  const L2Report r = run_l2_chain(fam, s);
  CHECK(r.M == 6);
  CHECK(r.cover_level == 7);
  REQUIRE(r.selection.found);
  CHECK(r.levels.size() == 3);
  CHECK(r.cs_ok);
  for (const auto& lv : r.levels) {
    CHECK(lv.cs.tube_mass > 0.0);
    CHECK(lv.shells.size() == 2);
  }
  const L2Report again = run_l2_chain(fam, s);
  CHECK(again.levels.back().cs.pair_mass == r.levels.back().cs.pair_mass);
  s.deltas = {0.0625};
  CHECK_THROWS_AS(run_l2_chain(fam, s), std::invalid_argument);
}
