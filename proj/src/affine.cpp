#include "affdim/affine.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace affdim {

Ambient make_ambient(int n, int k) {
  if (k < 1 || k >= n) {
    throw std::invalid_argument("ambient requires 1 <= k < n, got n=" + std::to_string(n) +
                                ", k=" + std::to_string(k));
  }
  return Ambient{n, k};
}

AffinePlane::AffinePlane(Ambient ambient, std::vector<double> code)
    : ambient_(make_ambient(ambient.n, ambient.k)), code_(std::move(code)) {
  if (static_cast<int>(code_.size()) != ambient_.code_size()) {
    throw std::invalid_argument("plane code has length " + std::to_string(code_.size()) +
                                ", expected " + std::to_string(ambient_.code_size()));
  }
  for (double v : code_) {
    if (!std::isfinite(v)) throw std::invalid_argument("plane code must be finite");
  }
}

std::span<const double> AffinePlane::intercept() const {
  return std::span<const double>(code_).first(ambient_.codim());
}

std::span<const double> AffinePlane::slope(int l) const {
  if (l < 1 || l > ambient_.k) throw std::out_of_range("slope index out of range");
  const auto m = static_cast<std::size_t>(ambient_.codim());
  return std::span<const double>(code_).subspan(static_cast<std::size_t>(l) * m, m);
}

void AffinePlane::graph(std::span<const double> t, std::span<double> out) const {
  const int m = ambient_.codim();
  if (static_cast<int>(t.size()) != ambient_.k || static_cast<int>(out.size()) != m) {
    throw std::invalid_argument("graph: parameter or output length mismatch");
  }
  for (int j = 0; j < m; ++j) out[j] = code_[j];
  for (int l = 0; l < ambient_.k; ++l) {
    const double* b = code_.data() + static_cast<std::size_t>(l + 1) * m;
    for (int j = 0; j < m; ++j) out[j] += t[l] * b[j];
  }
}

AffinePlane plane_from_code(std::span<const double> intercept,
                            std::span<const std::vector<double>> slopes, Ambient ambient) {
  ambient = make_ambient(ambient.n, ambient.k);
  const auto m = static_cast<std::size_t>(ambient.codim());
  if (intercept.size() != m) {
    throw std::invalid_argument("intercept must have length n - k = " + std::to_string(m));
  }
  if (slopes.size() != static_cast<std::size_t>(ambient.k)) {
    throw std::invalid_argument("expected " + std::to_string(ambient.k) + " slope vectors, got " +
                                std::to_string(slopes.size()));
  }
  std::vector<double> code(intercept.begin(), intercept.end());
  for (const auto& b : slopes) {
    if (b.size() != m) throw std::invalid_argument("slope vector must have length n - k");
    code.insert(code.end(), b.begin(), b.end());
  }
  return AffinePlane(ambient, std::move(code));
}

AffinePlane code_from_intersections(std::span<const Point> points, Ambient ambient) {
  ambient = make_ambient(ambient.n, ambient.k);
  const int n = ambient.n;
  const int k = ambient.k;
  if (points.size() != static_cast<std::size_t>(k + 1)) {
    throw std::invalid_argument("need exactly k + 1 intersection points");
  }
  for (int i = 0; i <= k; ++i) {
    const Point& p = points[i];
    if (static_cast<int>(p.size()) != n) throw std::invalid_argument("point dimension mismatch");
    for (int c = 0; c < k; ++c) {
      // Leading coordinates are emitted exactly by constructions.
      const double expected = (c + 1 == i) ? 1.0 : 0.0;
      if (p[c] != expected) {
        throw std::invalid_argument("point " + std::to_string(i) +
                                    " does not lie on H_" + std::to_string(i));
      }
    }
  }
  std::vector<double> code(points[0].begin() + k, points[0].end());
  for (int l = 1; l <= k; ++l) {
    for (int j = k; j < n; ++j) code.push_back(points[l][j] - points[0][j]);
  }
  return AffinePlane(ambient, std::move(code));
}

Point point_on_plane(const AffinePlane& plane, std::span<const double> t) {
  const Ambient& a = plane.ambient();
  if (static_cast<int>(t.size()) != a.k) {
    throw std::invalid_argument("parameter must have length k = " + std::to_string(a.k));
  }
  Point y(a.n);
  std::copy(t.begin(), t.end(), y.begin());
  plane.graph(t, std::span<double>(y).subspan(a.k));
  return y;
}

Projection orthogonal_project(const AffinePlane& plane, std::span<const double> y) {
  const PlaneFrame frame(plane);
  const int n = frame.n();
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("point dimension mismatch");
  const auto origin = frame.origin();
  Projection out;
  out.foot.assign(origin.begin(), origin.end());
  for (int i = 0; i < frame.k(); ++i) {
    const auto u = frame.tangent(i);
    double dot = 0.0;
    for (int c = 0; c < n; ++c) dot += u[c] * (y[c] - origin[c]);
    for (int c = 0; c < n; ++c) out.foot[c] += dot * u[c];
  }
  double d2 = 0.0;
  for (int c = 0; c < n; ++c) d2 += (y[c] - out.foot[c]) * (y[c] - out.foot[c]);
  out.distance = std::sqrt(d2);
  return out;
}

namespace {

void require_same_ambient(const AffinePlane& p, const AffinePlane& q) {
  if (!(p.ambient() == q.ambient())) {
    throw std::invalid_argument("planes live in different ambients");
  }
}

}  // namespace

double intercept_distance(const AffinePlane& p, const AffinePlane& q) {
  require_same_ambient(p, q);
  const auto a = p.intercept();
  const auto b = q.intercept();
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
  return d;
}

double slope_distance(const AffinePlane& p, const AffinePlane& q) {
  require_same_ambient(p, q);
  const auto a = p.code();
  const auto b = q.code();
  double d = 0.0;
  for (std::size_t j = static_cast<std::size_t>(p.ambient().codim()); j < a.size(); ++j) {
    d = std::max(d, std::abs(a[j] - b[j]));
  }
  return d;
}

double code_metric(const AffinePlane& p, const AffinePlane& q) {
  return std::max(intercept_distance(p, q), slope_distance(p, q));
}

PlaneFrame::PlaneFrame(const AffinePlane& plane)
    : n_(plane.ambient().n), k_(plane.ambient().k), origin_(static_cast<std::size_t>(n_), 0.0) {
  const int m = n_ - k_;
  const auto a0 = plane.intercept();
  for (int j = 0; j < m; ++j) origin_[k_ + j] = a0[j];

  Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(n_, k_);
  for (int l = 0; l < k_; ++l) {
    directions(l, l) = 1.0;
    const auto b = plane.slope(l + 1);
    for (int j = 0; j < m; ++j) directions(k_ + j, l) = b[j];
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(directions);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n_, n_);

  tangent_.resize(static_cast<std::size_t>(k_) * n_);
  normal_.resize(static_cast<std::size_t>(m) * n_);
  for (int i = 0; i < k_; ++i)
    for (int c = 0; c < n_; ++c) tangent_[static_cast<std::size_t>(i) * n_ + c] = q(c, i);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < n_; ++c) normal_[static_cast<std::size_t>(i) * n_ + c] = q(c, k_ + i);
}

std::span<const double> PlaneFrame::tangent(int i) const {
  return std::span<const double>(tangent_).subspan(static_cast<std::size_t>(i) * n_, n_);
}

std::span<const double> PlaneFrame::normal(int i) const {
  return std::span<const double>(normal_).subspan(static_cast<std::size_t>(i) * n_, n_);
}

double PlaneFrame::distance_squared(std::span<const double> y) const {
  // Sum of squared normal components; exact up to rounding for any y.
  const int m = n_ - k_;
  double d2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* v = normal_.data() + static_cast<std::size_t>(i) * n_;
    double dot = 0.0;
    for (int c = 0; c < n_; ++c) dot += v[c] * (y[c] - origin_[c]);
    d2 += dot * dot;
  }
  return d2;
}

DomainBox::DomainBox(Ambient ambient, double delta0)
    : ambient_(make_ambient(ambient.n, ambient.k)), delta0_(delta0) {
  if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
  const double k = ambient_.k;
  if (delta0 * (k + std::sqrt(k)) >= 1.0 || delta0 >= 0.5) {
    throw std::invalid_argument("delta0 too large: the inner window S' would be empty");
  }
}

double DomainBox::volume() const {
  double f = 1.0;
  for (int i = 2; i <= ambient_.k; ++i) f *= i;
  return 1.0 / f;
}

bool DomainBox::contains(std::span<const double> y) const {
  const int k = ambient_.k;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    if (y[i] < 0.0) return false;
    sum += y[i];
  }
  if (sum > 1.0) return false;
  for (int j = k; j < ambient_.n; ++j) {
    if (std::abs(y[j]) > 0.5) return false;
  }
  return true;
}

bool DomainBox::inner_contains(std::span<const double> y) const {
  // Inner parallel body at distance delta0: facets t_i = 0 move in by delta0,
  // the facet sum t = 1 (unit normal (1,..,1)/sqrt(k)) by delta0 * sqrt(k).
  const int k = ambient_.k;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    if (!(y[i] > delta0_)) return false;
    sum += y[i];
  }
  if (!(sum < 1.0 - delta0_ * std::sqrt(static_cast<double>(k)))) return false;
  for (int j = k; j < ambient_.n; ++j) {
    if (!(std::abs(y[j]) < 0.5 - delta0_)) return false;
  }
  return true;
}

}  // namespace affdim
