#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace affdim {

inline constexpr int kMaxDim = 8;

using CellKey = std::array<std::int64_t, kMaxDim>;

inline CellKey cell_of(std::span<const double> y, double side) {
  CellKey key{};
  for (std::size_t c = 0; c < y.size(); ++c) {
    key[c] = static_cast<std::int64_t>(std::floor(y[c] / side));
  }
  return key;
}

/// Uniform bucket grid over a point set: points are sorted by cell so each
/// occupied cell owns a contiguous index range.
class BucketIndex {
 public:
  BucketIndex(int n, std::span<const double> coords, double side);

  int n() const { return n_; }
  double side() const { return side_; }
  std::size_t cell_count() const { return keys_.size(); }
  const CellKey& cell_key(std::size_t c) const { return keys_[c]; }
  /// Point indices stored in occupied cell c.
  std::span<const std::uint32_t> cell_points(std::size_t c) const;
  /// Position of the occupied cell with this key, or cell_count() if empty.
  std::size_t find(const CellKey& key) const;

  /// Calls visit(point index) for every point in cells meeting the cube
  /// [lo, hi] (per coordinate, inclusive bounds in cell units).
  template <class Visit>
  void for_each_in_cells(const CellKey& lo, const CellKey& hi, Visit&& visit) const {
    CellKey cur = lo;
    while (true) {
      const std::size_t c = find(cur);
      if (c < keys_.size()) {
        for (std::uint32_t idx : cell_points(c)) visit(idx);
      }
      int d = 0;
      while (d < n_) {
        if (++cur[d] <= hi[d]) break;
        cur[d] = lo[d];
        ++d;
      }
      if (d == n_) return;
    }
  }

  /// Calls visit(point index) for every point whose cell meets the closed
  /// ball of the given radius around y (a superset of the points in the ball).
  template <class Visit>
  void for_each_near(std::span<const double> y, double radius, Visit&& visit) const {
    CellKey lo{};
    CellKey hi{};
    for (int c = 0; c < n_; ++c) {
      lo[c] = static_cast<std::int64_t>(std::floor((y[c] - radius) / side_));
      hi[c] = static_cast<std::int64_t>(std::floor((y[c] + radius) / side_));
    }
    for_each_in_cells(lo, hi, visit);
  }

  /// True when pred(point index) holds for some point visited by
  /// for_each_near; stops at the first such point.
  template <class Pred>
  bool any_near(std::span<const double> y, double radius, Pred&& pred) const {
    CellKey lo{};
    CellKey cur{};
    CellKey hi{};
    for (int c = 0; c < n_; ++c) {
      lo[c] = static_cast<std::int64_t>(std::floor((y[c] - radius) / side_));
      hi[c] = static_cast<std::int64_t>(std::floor((y[c] + radius) / side_));
    }
    cur = lo;
    while (true) {
      const std::size_t c = find(cur);
      if (c < keys_.size()) {
        for (std::uint32_t idx : cell_points(c)) {
          if (pred(idx)) return true;
        }
      }
      int d = 0;
      while (d < n_) {
        if (++cur[d] <= hi[d]) break;
        cur[d] = lo[d];
        ++d;
      }
      if (d == n_) return false;
    }
  }

 private:
  static constexpr std::uint32_t kEmptySlot = 0xffffffffU;
  std::size_t hash_key(const CellKey& key) const;

  int n_;
  double side_;
  std::vector<CellKey> keys_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> order_;
  // Open addressing table from key hash to occupied cell.
  std::vector<std::uint32_t> slots_;
  std::size_t slot_mask_ = 0;
};

}  // namespace affdim
