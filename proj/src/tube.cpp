#include "affdim/tube.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "affdim/parallel.hpp"
#include "affdim/spatial.hpp"

namespace affdim {
namespace {

void require_dim(const Ambient& a) {
  if (a.n > kMaxDim) throw std::invalid_argument("ambient dimension above 8 is not supported");
}

/// Stack copy of a plane frame's normal rows for the sampling loops.
struct FastTube {
  int n = 0;
  int m = 0;
  double delta2 = 0.0;
  std::array<double, kMaxDim> origin{};
  std::array<double, kMaxDim * kMaxDim> normal{};

  FastTube(const AffinePlane& plane, double delta) {
    const PlaneFrame frame(plane);
    n = frame.n();
    m = n - frame.k();
    delta2 = delta * delta;
    std::copy(frame.origin().begin(), frame.origin().end(), origin.begin());
    for (int i = 0; i < m; ++i) {
      const auto row = frame.normal(i);
      std::copy(row.begin(), row.end(), normal.begin() + i * kMaxDim);
    }
  }

  bool contains(const double* y) const {
    double d2 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double* v = normal.data() + i * kMaxDim;
      double dot = 0.0;
      for (int c = 0; c < n; ++c) dot += v[c] * (y[c] - origin[c]);
      d2 += dot * dot;
      if (d2 >= delta2) return false;
    }
    return true;
  }
};

/// Uniform point of the simplex {t >= 0, sum t <= 1} via sorted-uniform spacings.
void sample_simplex(Engine& engine, int k, double* t) {
  if (k == 1) {
    t[0] = uniform01(engine);
    return;
  }
  std::array<double, kMaxDim> u{};
  for (int i = 0; i < k; ++i) u[i] = uniform01(engine);
  std::sort(u.begin(), u.begin() + k);
  t[0] = u[0];
  for (int i = 1; i < k; ++i) t[i] = u[i] - u[i - 1];
}

double frobenius_c(const AffinePlane& plane) {
  const auto code = plane.code();
  double sum = 0.0;
  for (std::size_t j = static_cast<std::size_t>(plane.ambient().codim()); j < code.size(); ++j) {
    sum += code[j] * code[j];
  }
  return std::sqrt(1.0 + sum);
}

}  // namespace

bool in_tube(const TubeSpec& tube, std::span<const double> y) {
  if (!(tube.delta > 0.0)) throw std::invalid_argument("tube radius must be positive");
  return orthogonal_project(tube.plane, y).distance < tube.delta;
}

SlopeBound SlopeBound::from_max(Ambient ambient, double b_max) {
  if (!(b_max >= 0.0)) throw std::invalid_argument("slope bound must be nonnegative");
  SlopeBound sb;
  sb.b_max = b_max;
  sb.c = std::sqrt(1.0 + static_cast<double>(ambient.k) * ambient.codim() * b_max * b_max);
  sb.D = 2.0 * sb.c;
  return sb;
}

SlopeBound derive_slope_bound(std::span<const AffinePlane> planes) {
  if (planes.empty()) throw std::invalid_argument("cannot derive a slope bound from an empty family");
  const Ambient a = planes.front().ambient();
  double b_max = 0.0;
  for (const auto& p : planes) {
    const auto code = p.code();
    for (std::size_t j = static_cast<std::size_t>(a.codim()); j < code.size(); ++j) {
      b_max = std::max(b_max, std::abs(code[j]));
    }
  }
  return SlopeBound::from_max(a, b_max);
}

SlopeBound derive_slope_bound(const WeightedFamily& family) {
  return derive_slope_bound(std::span<const AffinePlane>(family.planes));
}

bool separation_test(const AffinePlane& p, const AffinePlane& q, double delta,
                     const SlopeBound& bound) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  return intercept_distance(p, q) > slope_distance(p, q) + bound.D * delta;
}

double strip_bound(const AffinePlane& p, const AffinePlane& q, double delta,
                   const SlopeBound& bound) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const Ambient& a = p.ambient();
  const int m = a.codim();
  const auto bp = p.code();
  const auto bq = q.code();

  // Locate (i, j) attaining ||b - b'||; first hit wins on ties.
  double best = 0.0;
  int best_j = -1;
  for (int l = 1; l <= a.k; ++l) {
    for (int j = 0; j < m; ++j) {
      const std::size_t idx = static_cast<std::size_t>(l) * m + j;
      const double diff = std::abs(bp[idx] - bq[idx]);
      if (diff > best) {
        best = diff;
        best_j = j;
      }
    }
  }
  if (best_j < 0 || !(best > 0.0)) {
    throw std::domain_error("strip bound undefined for planes with equal slopes");
  }
  double grad2 = 0.0;
  for (int l = 1; l <= a.k; ++l) {
    const std::size_t idx = static_cast<std::size_t>(l) * m + best_j;
    grad2 += (bp[idx] - bq[idx]) * (bp[idx] - bq[idx]);
  }
  const double side = 2.0 * bound.c * delta;
  const double width = side / std::sqrt(grad2);
  return std::pow(side, m) * std::pow(std::sqrt(2.0), a.k - 1) * width;
}

McEstimate intersection_volume_mc(const AffinePlane& p, const AffinePlane& q, double delta,
                                  const DomainBox& box, std::uint64_t samples,
                                  std::uint64_t seed, SamplingRegion region) {
  if (samples < 1) throw std::invalid_argument("need at least one sample");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const Ambient& a = p.ambient();
  if (!(q.ambient() == a) || !(box.ambient() == a)) {
    throw std::invalid_argument("planes and window must share one ambient");
  }
  require_dim(a);
  const int k = a.k;
  const int m = a.codim();

  const FastTube tube_p(p, delta);
  const FastTube tube_q(q, delta);
  const double c_p = frobenius_c(p);
  const double half_slab = c_p * delta;

  const std::uint64_t chunks = (samples + kMcChunkSize - 1) / kMcChunkSize;
  std::vector<std::uint64_t> chunk_hits(chunks, 0);

  parallel_for(chunks, [&](std::size_t chunk) {
    Engine engine(derive_seed(seed, chunk));
    const std::uint64_t begin = chunk * kMcChunkSize;
    const std::uint64_t end = std::min<std::uint64_t>(samples, begin + kMcChunkSize);
    std::array<double, kMaxDim> y{};
    std::array<double, kMaxDim> f{};
    std::uint64_t hits = 0;
    for (std::uint64_t s = begin; s < end; ++s) {
      sample_simplex(engine, k, y.data());
      if (region == SamplingRegion::window) {
        for (int j = 0; j < m; ++j) y[k + j] = uniform01(engine) - 0.5;
      } else {
        p.graph(std::span<const double>(y.data(), k), std::span<double>(f.data(), m));
        bool inside = true;
        for (int j = 0; j < m; ++j) {
          y[k + j] = f[j] + half_slab * (2.0 * uniform01(engine) - 1.0);
          inside = inside && std::abs(y[k + j]) <= 0.5;
        }
        if (!inside) continue;
      }
      if (tube_p.contains(y.data()) && tube_q.contains(y.data())) ++hits;
    }
    chunk_hits[chunk] = hits;
  });

  std::uint64_t hits = 0;
  for (auto h : chunk_hits) hits += h;

  McEstimate out;
  out.samples = samples;
  out.hits = hits;
  out.region_volume = box.volume();
  if (region == SamplingRegion::tube_envelope) {
    out.region_volume *= std::pow(2.0 * half_slab, m);
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  out.estimate = out.region_volume * frac;
  out.std_error = out.region_volume * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples));
  return out;
}

double gengeo_ratio(const AffinePlane& p, const AffinePlane& q, double delta,
                    const DomainBox& box, std::uint64_t samples, std::uint64_t seed,
                    SamplingRegion region) {
  const McEstimate mc = intersection_volume_mc(p, q, delta, box, samples, seed, region);
  const int power = p.ambient().codim() + 1;
  return mc.estimate * (code_metric(p, q) + delta) / std::pow(delta, power);
}

}  // namespace affdim
