#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "js3c/point_cloud.hpp"
#include "js3c/sparse_tensor.hpp"
#include "js3c/tape.hpp"

namespace js3c {

struct VoxelizeResult {
  SparseTensor tensor;
  PointVoxelMap map;
};

// Buckets points into grid cells of `spec`. Voxel features are the mean of
// member point features. Voxel rows are ordered lexicographically by
// (x, y, z). Points outside the grid raise a contract error naming the
// offending point index.
VoxelizeResult voxelize_points(const PointCloud& cloud, const VolumeSpec& spec);

// Same bucketing against an unbounded grid anchored at `origin`; used by the
// segmentation branch where the working extent follows the data.
VoxelizeResult voxelize_points_unbounded(const PointCloud& cloud,
                                         const Vec3& origin, double voxel_size);

// Copies each voxel row back to its member points: out[p] = feats[map[p]].
// Tape op; the adjoint scatter-adds point gradients onto voxel rows.
int devoxelize(ad::Tape& tape, int voxel_feats, const PointVoxelMap& map);

// Most frequent label per voxel, ignoring label 0 unless every member point
// carries 0 (then 0). Frequency ties resolve to the smallest class id.
std::vector<std::int32_t> majority_vote_labels(
    const std::vector<std::int32_t>& point_labels, const PointVoxelMap& map);

}  // namespace js3c
