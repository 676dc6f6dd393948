#pragma once

#include <array>
#include <vector>

#include "js3c/coord_index.hpp"
#include "js3c/errors.hpp"
#include "js3c/tensor.hpp"

namespace js3c {

// M unique integer voxel coordinates with an M x F feature matrix and a
// coordinate -> row lookup. Row order is the canonical order produced by
// voxelization (lexicographic by (x, y, z)) unless stated otherwise.
struct SparseTensor {
  std::vector<std::array<int, 3>> coords;
  ad::Tensor features;  // {M, F}
  CoordIndex index;

  long num_sites() const { return static_cast<long>(coords.size()); }
  long feature_dim() const { return features.rank() == 2 ? features.dim(1) : 0; }

  void rebuild_index() { index = CoordIndex(coords); }

  long find(const std::array<int, 3>& c) const { return index.find(c); }

  void validate() const {
    require(features.rank() == 2 &&
                features.dim(0) == static_cast<long>(coords.size()),
            "sparse tensor: feature rows must match coordinate count");
    require(index.size() == static_cast<long>(coords.size()),
            "sparse tensor: index out of sync with coordinates");
  }
};

// Bidirectional point <-> voxel correspondence produced by voxelization.
// Every point maps to exactly one voxel row; callers crop out-of-bounds
// points before voxelizing.
struct PointVoxelMap {
  std::vector<long> point_to_voxel;
  std::vector<std::vector<long>> voxel_to_points;
};

}  // namespace js3c
