#include "affdim/family.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace affdim {

const Ambient& WeightedFamily::ambient() const {
  if (planes.empty()) throw std::invalid_argument("empty family has no ambient");
  return planes.front().ambient();
}

double WeightedFamily::total_weight() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

void validate_family(const WeightedFamily& family) {
  if (family.planes.empty()) throw std::invalid_argument("family is empty");
  if (family.planes.size() != family.weights.size()) {
    throw std::invalid_argument("family has mismatched plane and weight counts");
  }
  const Ambient& a = family.ambient();
  for (const auto& p : family.planes) {
    if (!(p.ambient() == a)) throw std::invalid_argument("family planes have different ambients");
  }
  for (double w : family.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("negative or non-finite weight");
  }
  if (std::abs(family.total_weight() - 1.0) > 1e-12) {
    throw std::invalid_argument("family weights must sum to 1");
  }
  if (!(family.target_s > 0.0 && family.target_s <= 1.0)) {
    throw std::invalid_argument("family target dimension must lie in (0, 1]");
  }
}

bool meets_window(const AffinePlane& plane) {
  const Ambient& a = plane.ambient();
  const auto a0 = plane.intercept();
  for (int j = 0; j < a.codim(); ++j) {
    if (std::abs(a0[j]) > 0.5) return false;
  }
  for (int l = 1; l <= a.k; ++l) {
    const auto b = plane.slope(l);
    for (int j = 0; j < a.codim(); ++j) {
      if (std::abs(a0[j] + b[j]) > 0.5) return false;
    }
  }
  return true;
}

WeightedFamily uniform_family(std::vector<AffinePlane> planes, double target_s, int depth,
                              double resolution) {
  WeightedFamily f;
  const double w = planes.empty() ? 0.0 : 1.0 / static_cast<double>(planes.size());
  f.weights.assign(planes.size(), w);
  f.planes = std::move(planes);
  f.target_s = target_s;
  f.depth = depth;
  f.resolution = resolution;
  return f;
}

}  // namespace affdim
