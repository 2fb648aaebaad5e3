#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace affdim {

/// Samples drawn per Monte Carlo chunk. Each chunk owns an engine seeded from
/// (run seed, chunk index), so results depend on the seed and sample count but
/// never on the worker count.
inline constexpr std::size_t kMcChunkSize = 4096;

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency; 0 restores the default.
void set_worker_count(unsigned workers);
unsigned worker_count();

/// Runs body(i) for every i in [0, count). Iterations are handed out in
/// order to the workers; callers must write results into per-index slots and
/// reduce them afterwards in index order. Nested calls run serially on the
/// calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// SplitMix64 generator. Chosen over std::mt19937_64, which costs several
/// times more per draw and dominates the Monte Carlo inner loops.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Engine(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  constexpr result_type operator()() {
    const result_type out = mix_seed(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

 private:
  std::uint64_t state_;
};

/// Uniform double in [0, 1) built from the top 53 bits; unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Engine& engine) {
  return static_cast<double>(static_cast<std::int64_t>(engine() >> 11)) * 0x1.0p-53;
}

}  // namespace affdim
