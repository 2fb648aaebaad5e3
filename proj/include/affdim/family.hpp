#pragma once

#include <cstddef>
#include <vector>

#include "affdim/affine.hpp"

namespace affdim {

/// Finite family of planes with a probability weight per plane; the discrete
/// stand-in for a Frostman measure on a set of planes.
struct WeightedFamily {
  std::vector<AffinePlane> planes;
  std::vector<double> weights;
  /// Dimension the family models, in (0, 1].
  double target_s = 1.0;
  /// Construction depth; 0 for hand-built families.
  int depth = 0;
  /// Finest construction cell in code space; the family resolves its ideal
  /// set only at scales above this.
  double resolution = 0.0;

  std::size_t size() const { return planes.size(); }
  const Ambient& ambient() const;
  double total_weight() const;
};

/// Checks the structural invariants: matching lengths, one shared ambient,
/// nonnegative weights summing to 1 within 1e-12. Throws std::invalid_argument.
void validate_family(const WeightedFamily& family);

/// True when every plane meets each H_i = {t = e_i} inside the window S, i.e.
/// a0 and a0 + b^l all lie in [-1/2, 1/2]^{n-k}.
bool meets_window(const AffinePlane& plane);

WeightedFamily uniform_family(std::vector<AffinePlane> planes, double target_s, int depth = 0,
                              double resolution = 0.0);

}  // namespace affdim
