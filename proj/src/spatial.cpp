#include "affdim/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace affdim {

BucketIndex::BucketIndex(int n, std::span<const double> coords, double side)
    : n_(n), side_(side) {
  if (n < 1 || n > kMaxDim) throw std::invalid_argument("bucket index supports 1 <= n <= 8");
  if (!(side > 0.0)) throw std::invalid_argument("bucket side must be positive");
  const std::size_t count = coords.size() / static_cast<std::size_t>(n);
  if (count > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("too many points for a bucket index");
  }
  std::vector<CellKey> point_keys(count);
  for (std::size_t i = 0; i < count; ++i) {
    point_keys[i] = cell_of(coords.subspan(i * n, n), side);
  }
  order_.resize(count);
  std::iota(order_.begin(), order_.end(), 0U);
  std::stable_sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
    return point_keys[a] < point_keys[b];
  });
  for (std::size_t i = 0; i < count; ++i) {
    const CellKey& key = point_keys[order_[i]];
    if (keys_.empty() || keys_.back() != key) {
      keys_.push_back(key);
      offsets_.push_back(static_cast<std::uint32_t>(i));
    }
  }
  offsets_.push_back(static_cast<std::uint32_t>(count));

  std::size_t slots = 16;
  while (slots < 2 * keys_.size()) slots *= 2;
  slot_mask_ = slots - 1;
  slots_.assign(slots, kEmptySlot);
  for (std::size_t c = 0; c < keys_.size(); ++c) {
    std::size_t h = hash_key(keys_[c]) & slot_mask_;
    while (slots_[h] != kEmptySlot) h = (h + 1) & slot_mask_;
    slots_[h] = static_cast<std::uint32_t>(c);
  }
}

std::size_t BucketIndex::hash_key(const CellKey& key) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int d = 0; d < n_; ++d) {
    h ^= static_cast<std::uint64_t>(key[d]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return static_cast<std::size_t>(h);
}

std::span<const std::uint32_t> BucketIndex::cell_points(std::size_t c) const {
  return std::span<const std::uint32_t>(order_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
}

std::size_t BucketIndex::find(const CellKey& key) const {
  std::size_t h = hash_key(key) & slot_mask_;
  while (true) {
    const std::uint32_t c = slots_[h];
    if (c == kEmptySlot) return keys_.size();
    if (keys_[c] == key) return c;
    h = (h + 1) & slot_mask_;
  }
}

}  // namespace affdim
