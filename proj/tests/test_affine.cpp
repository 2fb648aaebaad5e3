#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "affdim/affine.hpp"
#include "affdim/family.hpp"
#include "doctest.h"

using namespace affdim;

namespace {

AffinePlane line(double a, double b) { return AffinePlane({2, 1}, {a, b}); }

}  // namespace

TEST_CASE("ambient rejects k outside [1, n)") {
  CHECK_THROWS_AS(make_ambient(2, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_ambient(2, 2), std::invalid_argument);
  CHECK(make_ambient(3, 2).code_size() == 3);
}

TEST_CASE("plane_from_code builds the graph map") {
  const std::vector<double> a0{0.3};
  const std::vector<std::vector<double>> slopes{{0.2}};
  const AffinePlane p = plane_from_code(a0, slopes, {2, 1});
  double out = 0.0;
  const double t = 0.5;
  p.graph(std::span<const double>(&t, 1), std::span<double>(&out, 1));
  CHECK(out == doctest::Approx(0.4));

  const std::vector<double> a3{0.5};
  const std::vector<std::vector<double>> s3{{0.1}, {-0.2}};
  const AffinePlane q = plane_from_code(a3, s3, {3, 2});
  const std::vector<double> t10{1.0, 0.0};
  const Point y = point_on_plane(q, t10);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(0.6));
  const std::vector<double> t01{0.0, 1.0};
  CHECK(point_on_plane(q, t01)[2] == doctest::Approx(0.3));

  const std::vector<std::vector<double>> short_slopes{{0.1}};
  CHECK_THROWS_AS(plane_from_code(a3, short_slopes, {3, 2}), std::invalid_argument);
}

TEST_CASE("code_from_intersections inverts point_on_plane") {
  const std::vector<Point> pts{{0.0, 0.3}, {1.0, 0.5}};
  const AffinePlane p = code_from_intersections(pts, {2, 1});
  CHECK(p.intercept()[0] == doctest::Approx(0.3));
  CHECK(p.slope(1)[0] == doctest::Approx(0.2));

  const std::vector<Point> horizontal{{0.0, 0.1, 0.2}, {1.0, 0.1, 0.2}};
  const AffinePlane h = code_from_intersections(horizontal, {3, 1});
  CHECK(h.intercept()[1] == doctest::Approx(0.2));
  CHECK(h.slope(1)[0] == 0.0);
  CHECK(h.slope(1)[1] == 0.0);

  const std::vector<Point> bad{{0.5, 0.3}, {1.0, 0.5}};
  CHECK_THROWS_AS(code_from_intersections(bad, {2, 1}), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> code(6);
    for (auto& v : code) v = u(rng);
    const AffinePlane q({4, 2}, code);
    std::vector<Point> hits;
    for (int i = 0; i <= 2; ++i) {
      std::vector<double> t(2, 0.0);
      if (i > 0) t[i - 1] = 1.0;
      hits.push_back(point_on_plane(q, t));
    }
    const AffinePlane back = code_from_intersections(hits, {4, 2});
    for (int j = 0; j < 6; ++j) CHECK(back.code()[j] == doctest::Approx(code[j]).epsilon(1e-12));
  }
}

TEST_CASE("orthogonal projection") {
  const Point y{0.5, 1.0};
  const Projection pr = orthogonal_project(line(0.0, 0.0), y);
  CHECK(pr.foot[0] == doctest::Approx(0.5));
  CHECK(std::abs(pr.foot[1]) < 1e-15);
  CHECK(pr.distance == doctest::Approx(1.0));

  const Point z{1.0, 0.0};
  CHECK(orthogonal_project(line(0.0, 1.0), z).distance == doctest::Approx(std::sqrt(0.5)));

  // Points on the plane project to themselves; residuals are normal to every
  // direction vector (checked independently of the frame).
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> code(9);
    for (auto& v : code) v = u(rng);
    const AffinePlane q({5, 2}, code);
    const std::vector<double> t{u(rng), u(rng)};
    CHECK(orthogonal_project(q, point_on_plane(q, t)).distance < 1e-12);
    Point w(5);
    for (auto& v : w) v = u(rng);
    const Projection proj = orthogonal_project(q, w);
    for (int l = 1; l <= 2; ++l) {
      double dot = w[l - 1] - proj.foot[l - 1];
      for (int j = 0; j < 3; ++j) dot += (w[2 + j] - proj.foot[2 + j]) * q.slope(l)[j];
      CHECK(std::abs(dot) < 1e-12);
    }
    const PlaneFrame frame(q);
    CHECK(std::sqrt(frame.distance_squared(w)) == doctest::Approx(proj.distance).epsilon(1e-12));
  }
}

TEST_CASE("code metric") {
  CHECK(code_metric(line(0.2, 0.5), line(0.3, 0.1)) == doctest::Approx(0.4));
  CHECK(code_metric(line(0.2, 0.5), line(0.2, 0.5)) == 0.0);
  const AffinePlane p({3, 1}, {0.0, 0.0, 1.0, 0.0});
  const AffinePlane q({3, 1}, {0.0, 0.3, 1.0, 0.1});
  CHECK(code_metric(p, q) == doctest::Approx(0.3));
  CHECK_THROWS_AS(code_metric(line(0, 0), p), std::invalid_argument);
}

TEST_CASE("domain box") {
  const DomainBox box({3, 2}, 0.05);
  CHECK(box.volume() == doctest::Approx(0.5));
  const std::vector<double> inside{0.2, 0.2, 0.1};
  const std::vector<double> corner{0.0, 0.0, 0.5};
  CHECK(box.contains(inside));
  CHECK(box.inner_contains(inside));
  CHECK(box.contains(corner));
  CHECK_FALSE(box.inner_contains(corner));
  CHECK_THROWS_AS(DomainBox({2, 1}, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(DomainBox({2, 1}, 0.0), std::invalid_argument);
}

TEST_CASE("weighted family validation") {
  WeightedFamily f = uniform_family({line(0.0, 0.0), line(0.1, 0.0)}, 1.0);
  CHECK_NOTHROW(validate_family(f));
  f.weights[0] = 0.7;
  CHECK_THROWS_AS(validate_family(f), std::invalid_argument);
  f.weights = {0.5};
  CHECK_THROWS_AS(validate_family(f), std::invalid_argument);
  CHECK(meets_window(line(0.3, 0.2)));
  CHECK_FALSE(meets_window(line(0.4, 0.2)));
}
