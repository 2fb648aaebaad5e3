#pragma once

#include <cstdint>
#include <span>

#include "affdim/affine.hpp"
#include "affdim/family.hpp"

namespace affdim {

/// Open delta-neighbourhood of a plane.
struct TubeSpec {
  AffinePlane plane;
  double delta;
};

bool in_tube(const TubeSpec& tube, std::span<const double> y);

/// Certified thickening constants for planes whose slope entries are bounded
/// by b_max: a point at Euclidean distance < delta from such a plane is at
/// vertical (graph-direction) distance < c * delta. c = sqrt(1 + k(n-k) b_max^2)
/// bounds sqrt(1 + |Df|^2) via the Frobenius norm; D = 2c.
struct SlopeBound {
  double b_max = 0.0;
  double c = 1.0;
  double D = 2.0;

  static SlopeBound from_max(Ambient ambient, double b_max);
};

SlopeBound derive_slope_bound(std::span<const AffinePlane> planes);
SlopeBound derive_slope_bound(const WeightedFamily& family);

/// True iff ||a - a'|| > ||b - b'|| + D delta, which certifies that the two
/// delta-tubes do not meet inside the window S.
bool separation_test(const AffinePlane& p, const AffinePlane& q, double delta,
                     const SlopeBound& bound);

/// Upper bound (2c delta)^{n-k} (sqrt 2)^{k-1} * 2c delta / |grad| on the
/// volume of P_delta ∩ P'_delta ∩ S, where grad is the slope difference row
/// (b_j^i - b_j^i')_i for the coordinate j attaining ||b - b'||.
/// Throws std::domain_error when the slopes agree (parallel planes).
double strip_bound(const AffinePlane& p, const AffinePlane& q, double delta,
                   const SlopeBound& bound);

enum class SamplingRegion {
  /// Uniform over S = C x Q.
  window,
  /// Uniform over the vertical slab {t in C, |u - f(t)|_inf < c_P delta} of the
  /// first plane, which contains P_delta ∩ S; same estimand, far less variance
  /// for thin tubes.
  tube_envelope,
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  /// Measure of the sampled region.
  double region_volume = 0.0;
};

/// Monte Carlo estimate of the volume of P_delta ∩ P'_delta ∩ S. Samples are
/// split into chunks of kMcChunkSize with per-chunk seeds, so the result is a
/// function of (seed, samples) only.
McEstimate intersection_volume_mc(const AffinePlane& p, const AffinePlane& q, double delta,
                                  const DomainBox& box, std::uint64_t samples,
                                  std::uint64_t seed,
                                  SamplingRegion region = SamplingRegion::window);

/// estimate * (d(P,P') + delta) / delta^{n-k+1}.
double gengeo_ratio(const AffinePlane& p, const AffinePlane& q, double delta,
                    const DomainBox& box, std::uint64_t samples, std::uint64_t seed,
                    SamplingRegion region = SamplingRegion::window);

}  // namespace affdim
