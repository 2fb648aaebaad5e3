#pragma once

#include <span>
#include <vector>

namespace affdim {

using Point = std::vector<double>;

/// Ambient dimension n and subspace dimension k of non-vertical k-planes in R^n.
struct Ambient {
  int n = 2;
  int k = 1;

  int codim() const { return n - k; }
  /// Length of the flat code (a0, b1, ..., bk), i.e. (k + 1)(n - k).
  int code_size() const { return (k + 1) * (n - k); }

  friend bool operator==(const Ambient&, const Ambient&) = default;
};

/// Validates 1 <= k < n and returns the ambient; throws std::invalid_argument.
Ambient make_ambient(int n, int k);

/// A non-vertical k-plane, stored by its code: the intercept a0 on the
/// coordinate subspace {t = 0} and the slopes b^l = a^l - a0 where a^l is the
/// tail of the intersection with {t = e_l}. The plane is the graph
/// {(t, a0 + sum_l t_l b^l) : t in R^k}.
class AffinePlane {
 public:
  /// Flat code layout: a0[0..n-k), then b^1[0..n-k), ..., b^k[0..n-k).
  AffinePlane(Ambient ambient, std::vector<double> code);

  const Ambient& ambient() const { return ambient_; }
  std::span<const double> code() const { return code_; }
  std::span<const double> intercept() const;
  /// Slope vector b^l for l in [1, k].
  std::span<const double> slope(int l) const;

  /// Writes the graph map f(t) = a0 + sum_l t_l b^l into out (length n - k).
  void graph(std::span<const double> t, std::span<double> out) const;

  friend bool operator==(const AffinePlane&, const AffinePlane&) = default;

 private:
  Ambient ambient_;
  std::vector<double> code_;
};

AffinePlane plane_from_code(std::span<const double> intercept,
                            std::span<const std::vector<double>> slopes, Ambient ambient);

/// Recovers the code from the k + 1 points P ∩ H_i, where point i has leading
/// coordinates e_i (e_0 = 0).
AffinePlane code_from_intersections(std::span<const Point> points, Ambient ambient);

/// Returns (t, f(t)).
Point point_on_plane(const AffinePlane& plane, std::span<const double> t);

struct Projection {
  Point foot;
  double distance = 0.0;
};

/// Euclidean nearest point of the plane to y.
Projection orthogonal_project(const AffinePlane& plane, std::span<const double> y);

/// Max-norm distances between intercepts and between slope blocks.
double intercept_distance(const AffinePlane& p, const AffinePlane& q);
double slope_distance(const AffinePlane& p, const AffinePlane& q);

/// d(P, P') = max(||a - a'||, ||b - b'||) with max norms over all entries.
double code_metric(const AffinePlane& p, const AffinePlane& q);

/// Orthonormal frame of a plane: a base point, an orthonormal basis of the
/// direction space and one of its orthogonal complement. Used for fast
/// distance queries.
class PlaneFrame {
 public:
  explicit PlaneFrame(const AffinePlane& plane);

  int n() const { return n_; }
  int k() const { return k_; }
  std::span<const double> origin() const { return origin_; }
  /// Row i of the tangent basis, i in [0, k).
  std::span<const double> tangent(int i) const;
  /// Row i of the normal basis, i in [0, n - k).
  std::span<const double> normal(int i) const;

  double distance_squared(std::span<const double> y) const;

 private:
  int n_;
  int k_;
  std::vector<double> origin_;
  std::vector<double> tangent_;  // k x n, row major
  std::vector<double> normal_;   // (n - k) x n, row major
};

/// The window S = C x Q: C the standard simplex conv{0, e_1, ..., e_k} in the
/// first k coordinates and Q = [-1/2, 1/2]^{n-k}. The inner window S' keeps
/// distance delta0 from the boundary of S, so its open delta0-neighbourhood
/// lies in S.
class DomainBox {
 public:
  DomainBox(Ambient ambient, double delta0);

  const Ambient& ambient() const { return ambient_; }
  double delta0() const { return delta0_; }
  /// Lebesgue measure of S, 1/k!.
  double volume() const;

  bool contains(std::span<const double> y) const;
  bool inner_contains(std::span<const double> y) const;

 private:
  Ambient ambient_;
  double delta0_;
};

}  // namespace affdim
