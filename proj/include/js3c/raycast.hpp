#pragma once

#include <cstdint>
#include <vector>

#include "js3c/geometry.hpp"
#include "js3c/point_cloud.hpp"

namespace js3c {

// Per-cell observation state from free-space carving. Occupied always wins
// over empty-observed; merging keeps the stronger state.
enum class CellView : std::uint8_t { kUnobserved = 0, kEmpty = 1, kOccupied = 2 };

struct Visibility {
  VolumeSpec spec;
  std::vector<std::uint8_t> state;  // one CellView per cell, x-fastest

  Visibility() = default;
  explicit Visibility(const VolumeSpec& s)
      : spec(s), state(static_cast<std::size_t>(s.num_cells()),
                       static_cast<std::uint8_t>(CellView::kUnobserved)) {}

  CellView at(long cell) const {
    return static_cast<CellView>(state[static_cast<std::size_t>(cell)]);
  }
  void mark_empty(long cell) {
    std::uint8_t& s = state[static_cast<std::size_t>(cell)];
    if (s < static_cast<std::uint8_t>(CellView::kEmpty))
      s = static_cast<std::uint8_t>(CellView::kEmpty);
  }
  void mark_occupied(long cell) {
    state[static_cast<std::size_t>(cell)] =
        static_cast<std::uint8_t>(CellView::kOccupied);
  }
  // Cellwise maximum: occupied > empty > unobserved.
  void merge(const Visibility& other);
};

// Casts one ray per point from `origin`. Cells the segment passes through
// are marked empty-observed via an exact incremental grid traversal; the
// cell containing the endpoint (when inside the volume) is marked occupied.
// Segments are clipped to the volume, so far-away points still carve the
// cells they cross.
Visibility raycast_visibility(const PointCloud& frame, const Vec3& origin,
                              const VolumeSpec& spec);

}  // namespace js3c
