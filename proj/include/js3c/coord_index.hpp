#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "js3c/errors.hpp"

namespace js3c {

// Open-addressed hash table from integer voxel coordinates to a row index.
// Build-once, probe-many: no deletion. Linear probing over a power-of-two
// table kept under 50% load. The key is mixed through splitmix64 so that
// coordinate sets sharing low-order bits still spread evenly.
class CoordIndex {
 public:
  CoordIndex() = default;

  explicit CoordIndex(const std::vector<std::array<int, 3>>& coords) {
    std::size_t cap = 16;
    while (cap < coords.size() * 2 + 1) cap <<= 1;
    keys_.assign(cap, empty_key());
    rows_.assign(cap, -1);
    mask_ = cap - 1;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const std::uint64_t k = pack(coords[i]);
      std::size_t slot = mix(k) & mask_;
      while (true) {
        if (rows_[slot] < 0) {
          keys_[slot] = k;
          rows_[slot] = static_cast<long>(i);
          break;
        }
        require(keys_[slot] != k, "coord index: duplicate coordinate");
        slot = (slot + 1) & mask_;
      }
    }
    size_ = static_cast<long>(coords.size());
  }

  // Returns the row for coord, or -1 when absent.
  long find(const std::array<int, 3>& coord) const {
    if (rows_.empty()) return -1;
    const std::uint64_t k = pack(coord);
    std::size_t slot = mix(k) & mask_;
    while (rows_[slot] >= 0) {
      if (keys_[slot] == k) return rows_[slot];
      slot = (slot + 1) & mask_;
    }
    return -1;
  }

  long size() const { return size_; }

 private:
  // 21 bits per signed component; voxel indices stay far inside that range.
  static std::uint64_t pack(const std::array<int, 3>& c) {
    constexpr int kBits = 21;
    constexpr std::int64_t kLim = 1ll << (kBits - 1);
    for (int v : c)
      require(v >= -kLim && v < kLim, "coord index: coordinate magnitude too large");
    const std::uint64_t m = (1ull << kBits) - 1;
    return ((static_cast<std::uint64_t>(c[0]) & m)) |
           ((static_cast<std::uint64_t>(c[1]) & m) << kBits) |
           ((static_cast<std::uint64_t>(c[2]) & m) << (2 * kBits));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t empty_key() { return ~0ull; }

  std::vector<std::uint64_t> keys_;
  std::vector<long> rows_;
  std::size_t mask_ = 0;
  long size_ = 0;
};

}  // namespace js3c
