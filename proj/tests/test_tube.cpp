#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "affdim/parallel.hpp"
#include "affdim/tube.hpp"
#include "doctest.h"

using namespace affdim;

namespace {

AffinePlane line(double a, double b) { return AffinePlane({2, 1}, {a, b}); }

// Area of the intersection of two infinite strips of half-width delta whose
// centre lines cross at angle theta: a rhombus of area (2 delta)^2 / sin theta.
double crossing_strip_area(double b1, double b2, double delta) {
  const double sin_theta =
      std::abs(b1 - b2) / std::sqrt((1.0 + b1 * b1) * (1.0 + b2 * b2));
  return 4.0 * delta * delta / sin_theta;
}

}  // namespace

TEST_CASE("tube membership is open") {
  const TubeSpec tube{line(0.0, 0.0), 0.1};
  const std::vector<double> in{0.5, 0.05};
  const std::vector<double> out{0.5, 0.2};
  const std::vector<double> edge{0.5, 0.1};
  CHECK(in_tube(tube, in));
  CHECK_FALSE(in_tube(tube, out));
  CHECK_FALSE(in_tube(tube, edge));
}

TEST_CASE("slope bound constants") {
  const std::vector<AffinePlane> planes{line(0.0, 0.0), line(0.1, 0.5)};
  const SlopeBound sb = derive_slope_bound(planes);
  CHECK(sb.b_max == 0.5);
  CHECK(sb.c == doctest::Approx(std::sqrt(1.25)));
  CHECK(sb.D == doctest::Approx(2.2361).epsilon(1e-4));
  const std::vector<AffinePlane> flat{line(0.0, 0.0), line(0.2, 0.0)};
  CHECK(derive_slope_bound(flat).c == 1.0);
  CHECK(SlopeBound::from_max({3, 2}, 1.0).c == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("vertical thickness oracle: Euclidean delta implies vertical c delta") {
  // Perturb points of random planes by random vectors of norm < delta and
  // check the graph-direction offset stays below c delta in every coordinate.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g;
  const Ambient amb{4, 2};
  const double b_max = 0.8;
  const SlopeBound sb = SlopeBound::from_max(amb, b_max);
  const double delta = 0.01;
  double worst = 0.0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<double> code(6);
    for (int j = 0; j < 2; ++j) code[j] = 0.5 * u(rng);
    for (int j = 2; j < 6; ++j) code[j] = b_max * u(rng);
    const AffinePlane p(amb, code);
    const std::vector<double> t{0.3 * (u(rng) + 1), 0.3 * (u(rng) + 1)};
    Point y = point_on_plane(p, t);
    std::vector<double> v(4);
    double norm = 0.0;
    for (auto& x : v) {
      x = g(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < 4; ++c) y[c] += 0.999 * delta * v[c] / norm;
    std::vector<double> f(2);
    p.graph(std::span<const double>(y.data(), 2), f);
    for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(y[2 + j] - f[j]) / delta);
  }
  CHECK(worst < sb.c);
}

TEST_CASE("separation test") {
  const SlopeBound sb = SlopeBound::from_max({2, 1}, 0.5);
  CHECK(separation_test(line(0, 0), line(0.2, 0.1), 0.02, sb));
  CHECK_FALSE(separation_test(line(0, 0), line(0, 0), 0.02, sb));
  CHECK_FALSE(separation_test(line(0, 0), line(0.1, 0.1), 0.02, sb));

  // The certified pair has no joint hits in S.
  const DomainBox box({2, 1}, 0.01);
  const McEstimate mc = intersection_volume_mc(line(0, 0), line(0.2, 0.1), 0.02, box, 100000, 1);
  CHECK(mc.hits == 0);
  CHECK(mc.estimate == 0.0);
}

TEST_CASE("strip bound") {
  const SlopeBound sb = SlopeBound::from_max({2, 1}, 0.5);
  const double b1 = strip_bound(line(0.1, 0.0), line(-0.15, 0.5), 0.01, sb);
  CHECK(b1 == doctest::Approx(1.000e-3).epsilon(1e-3));
  const double b2 = strip_bound(line(0.1, 0.0), line(-0.15, 0.5), 0.005, sb);
  CHECK(b2 == doctest::Approx(b1 / 4.0));
  CHECK_THROWS_AS(strip_bound(line(0.1, 0.2), line(0.3, 0.2), 0.01, sb), std::domain_error);
}

TEST_CASE("Monte Carlo intersection volume") {
  const DomainBox box({2, 1}, 0.01);
  SUBCASE("identical horizontal lines: rectangle 2 delta x 1") {
    const McEstimate mc =
        intersection_volume_mc(line(0.0, 0.0), line(0.0, 0.0), 0.05, box, 200000, 5);
    CHECK(std::abs(mc.estimate - 0.1) <= 3.0 * mc.std_error);
    CHECK(gengeo_ratio(line(0, 0), line(0, 0), 0.05, box, 200000, 5) ==
          doctest::Approx(2.0).epsilon(0.03));
  }
  SUBCASE("crossing lines: parallelogram oracle") {
    const double oracle = crossing_strip_area(0.0, 0.5, 0.01);
    CHECK(oracle == doctest::Approx(8.944e-4).epsilon(1e-3));
    const McEstimate win =
        intersection_volume_mc(line(0.1, 0.0), line(-0.15, 0.5), 0.01, box, 2000000, 9);
    CHECK(std::abs(win.estimate - oracle) <= 3.0 * win.std_error);
    const McEstimate env = intersection_volume_mc(line(0.1, 0.0), line(-0.15, 0.5), 0.01, box,
                                                  200000, 9, SamplingRegion::tube_envelope);
    CHECK(std::abs(env.estimate - oracle) <= 3.0 * env.std_error);
    CHECK(env.std_error < win.std_error);
    const SlopeBound sb = SlopeBound::from_max({2, 1}, 0.5);
    CHECK(env.estimate <= strip_bound(line(0.1, 0.0), line(-0.15, 0.5), 0.01, sb));
    const double ratio = gengeo_ratio(line(0.1, 0.0), line(-0.15, 0.5), 0.01, box, 200000, 9,
                                      SamplingRegion::tube_envelope);
    CHECK(ratio == doctest::Approx(oracle * 0.51 / 1e-4).epsilon(0.05));
  }
  SUBCASE("result independent of worker count") {
    set_worker_count(1);
    const McEstimate a = intersection_volume_mc(line(0.1, 0.0), line(-0.15, 0.5), 0.01, box,
                                                50000, 17, SamplingRegion::tube_envelope);
    set_worker_count(4);
    const McEstimate b = intersection_volume_mc(line(0.1, 0.0), line(-0.15, 0.5), 0.01, box,
                                                50000, 17, SamplingRegion::tube_envelope);
    set_worker_count(0);
    CHECK(a.hits == b.hits);
    CHECK(a.estimate == b.estimate);
  }
  SUBCASE("three dimensions, k = 2: envelope and window agree") {
    const Ambient amb{3, 2};
    const DomainBox box3(amb, 0.01);
    const AffinePlane p(amb, {0.0, 0.2, -0.1});
    const AffinePlane q(amb, {0.05, -0.1, 0.1});
    const McEstimate win = intersection_volume_mc(p, q, 0.02, box3, 2000000, 4);
    const McEstimate env =
        intersection_volume_mc(p, q, 0.02, box3, 400000, 4, SamplingRegion::tube_envelope);
    const double tol = 3.0 * std::hypot(win.std_error, env.std_error);
    CHECK(std::abs(win.estimate - env.estimate) <= tol);
  }
}
