#include "js3c/voxelize.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "js3c/ops.hpp"

namespace js3c {

namespace {

VoxelizeResult bucket(const PointCloud& cloud,
                      const std::vector<std::array<int, 3>>& cell_of_point) {
  const long n = cloud.size();
  const long d = cloud.feature_dim();

  // Canonical voxel order: lexicographic by (x, y, z).
  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    const auto& ca = cell_of_point[static_cast<std::size_t>(a)];
    const auto& cb = cell_of_point[static_cast<std::size_t>(b)];
    if (ca != cb) return ca < cb;
    return a < b;
  });

  VoxelizeResult out;
  out.map.point_to_voxel.assign(static_cast<std::size_t>(n), -1);
  for (long k = 0; k < n; ++k) {
    const long p = order[static_cast<std::size_t>(k)];
    const auto& c = cell_of_point[static_cast<std::size_t>(p)];
    if (out.tensor.coords.empty() || out.tensor.coords.back() != c) {
      out.tensor.coords.push_back(c);
      out.map.voxel_to_points.emplace_back();
    }
    const long v = static_cast<long>(out.tensor.coords.size()) - 1;
    out.map.point_to_voxel[static_cast<std::size_t>(p)] = v;
    out.map.voxel_to_points.back().push_back(p);
  }

  const long m = static_cast<long>(out.tensor.coords.size());
  out.tensor.features = ad::Tensor({m, d});
  if (d > 0) {
    for (long v = 0; v < m; ++v) {
      const auto& members = out.map.voxel_to_points[static_cast<std::size_t>(v)];
      double* dst = &out.tensor.features.data[v * d];
      for (long p : members) {
        const double* src = &cloud.features.data[p * d];
        for (long j = 0; j < d; ++j) dst[j] += src[j];
      }
      const double inv = 1.0 / static_cast<double>(members.size());
      for (long j = 0; j < d; ++j) dst[j] *= inv;
    }
  }
  out.tensor.rebuild_index();
  return out;
}

}  // namespace

VoxelizeResult voxelize_points(const PointCloud& cloud, const VolumeSpec& spec) {
  cloud.validate();
  spec.validate();
  const long n = cloud.size();
  std::vector<std::array<int, 3>> cells(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const auto c = spec.cell_of(cloud.positions[static_cast<std::size_t>(i)]);
    require(spec.in_bounds(c),
            "voxelize: point " + std::to_string(i) + " outside volume");
    cells[static_cast<std::size_t>(i)] = {static_cast<int>(c[0]),
                                          static_cast<int>(c[1]),
                                          static_cast<int>(c[2])};
  }
  return bucket(cloud, cells);
}

VoxelizeResult voxelize_points_unbounded(const PointCloud& cloud,
                                         const Vec3& origin, double voxel_size) {
  cloud.validate();
  require(voxel_size > 0.0, "voxelize: voxel_size must be positive");
  const long n = cloud.size();
  std::vector<std::array<int, 3>> cells(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
    cells[static_cast<std::size_t>(i)] = {
        static_cast<int>(std::floor((p.x() - origin.x()) / voxel_size)),
        static_cast<int>(std::floor((p.y() - origin.y()) / voxel_size)),
        static_cast<int>(std::floor((p.z() - origin.z()) / voxel_size))};
  }
  return bucket(cloud, cells);
}

int devoxelize(ad::Tape& tape, int voxel_feats, const PointVoxelMap& map) {
  const ad::Tensor& f = tape.val(voxel_feats);
  require(f.rank() == 2, "devoxelize: voxel features must be rank 2");
  require(static_cast<long>(map.voxel_to_points.size()) == f.dim(0),
          "devoxelize: map voxel count does not match feature rows");
  std::vector<int> idx(map.point_to_voxel.size());
  for (std::size_t i = 0; i < map.point_to_voxel.size(); ++i) {
    const long v = map.point_to_voxel[i];
    require(v >= 0 && v < f.dim(0), "devoxelize: map references unknown voxel");
    idx[i] = static_cast<int>(v);
  }
  return ad::ops::gather_rows(tape, voxel_feats, std::move(idx));
}

std::vector<std::int32_t> majority_vote_labels(
    const std::vector<std::int32_t>& point_labels, const PointVoxelMap& map) {
  require(point_labels.size() == map.point_to_voxel.size(),
          "majority vote: label count does not match map");
  std::vector<std::int32_t> out(map.voxel_to_points.size(), 0);
  std::map<std::int32_t, long> hist;
  for (std::size_t v = 0; v < map.voxel_to_points.size(); ++v) {
    hist.clear();
    for (long p : map.voxel_to_points[v]) {
      const std::int32_t l = point_labels[static_cast<std::size_t>(p)];
      require(l >= 0, "majority vote: negative label");
      if (l != 0) ++hist[l];
    }
    if (hist.empty()) {
      out[v] = 0;
      continue;
    }
    // std::map iterates labels ascending, so on tied counts the smallest
    // class id wins.
    std::int32_t best = 0;
    long best_count = 0;
    for (const auto& [label, count] : hist) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    out[v] = best;
  }
  return out;
}

}  // namespace js3c
