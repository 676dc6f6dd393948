#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "js3c/geometry.hpp"
#include "js3c/tensor.hpp"

namespace js3c {

// N points with optional per-point features (N x D, D >= 0) and optional
// integer class labels. Label 0 means unlabeled/ignore.
struct PointCloud {
  std::vector<Vec3> positions;
  ad::Tensor features;  // shape {N, D}; D may be 0
  std::optional<std::vector<std::int32_t>> labels;

  long size() const { return static_cast<long>(positions.size()); }

  long feature_dim() const {
    return features.rank() == 2 ? features.dim(1) : 0;
  }

  void validate() const {
    const long n = size();
    if (features.numel() > 0 || features.rank() == 2)
      require(features.rank() == 2 && features.dim(0) == n,
              "point cloud: feature row count does not match point count");
    if (labels)
      require(static_cast<long>(labels->size()) == n,
              "point cloud: label count does not match point count");
    for (const Vec3& p : positions)
      require(p.allFinite(), "point cloud: non-finite position");
  }
};

inline PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  PointCloud out = cloud;
  for (Vec3& p : out.positions) p = pose.apply(p);
  return out;
}

}  // namespace js3c
