#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "js3c/errors.hpp"

namespace js3c {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform p' = R p + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose compose(const Pose& other) const {
    // (*this) after other: p -> this(other(p)).
    Pose out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  Pose inverse() const {
    Pose out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  static Pose identity() { return Pose{}; }

  static Pose rotation_z(double angle) {
    Pose out;
    const double c = std::cos(angle), s = std::sin(angle);
    out.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return out;
  }
};

// Axis-aligned voxel grid: origin corner, cubic cells, integer dims.
// Linear cell order is x-fastest: index = x + dims[0] * (y + dims[1] * z).
struct VolumeSpec {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 1.0;
  std::array<long, 3> dims{0, 0, 0};

  void validate() const {
    require(voxel_size > 0.0, "volume spec: voxel_size must be positive");
    require(dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1,
            "volume spec: dims must be at least 1");
  }

  long num_cells() const { return dims[0] * dims[1] * dims[2]; }

  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor((p.x() - origin.x()) / voxel_size)),
            static_cast<long>(std::floor((p.y() - origin.y()) / voxel_size)),
            static_cast<long>(std::floor((p.z() - origin.z()) / voxel_size))};
  }

  bool in_bounds(const std::array<long, 3>& c) const {
    return c[0] >= 0 && c[0] < dims[0] && c[1] >= 0 && c[1] < dims[1] &&
           c[2] >= 0 && c[2] < dims[2];
  }

  bool contains(const Vec3& p) const { return in_bounds(cell_of(p)); }

  long linear(long x, long y, long z) const {
    return x + dims[0] * (y + dims[1] * z);
  }

  long linear(const std::array<long, 3>& c) const {
    return linear(c[0], c[1], c[2]);
  }

  std::array<long, 3> delinear(long idx) const {
    const long x = idx % dims[0];
    const long y = (idx / dims[0]) % dims[1];
    const long z = idx / (dims[0] * dims[1]);
    return {x, y, z};
  }

  Vec3 center(const std::array<long, 3>& c) const {
    return origin + voxel_size * Vec3(static_cast<double>(c[0]) + 0.5,
                                      static_cast<double>(c[1]) + 0.5,
                                      static_cast<double>(c[2]) + 0.5);
  }

  Vec3 max_corner() const {
    return origin + voxel_size * Vec3(static_cast<double>(dims[0]),
                                      static_cast<double>(dims[1]),
                                      static_cast<double>(dims[2]));
  }

  bool operator==(const VolumeSpec& o) const {
    return origin == o.origin && voxel_size == o.voxel_size && dims == o.dims;
  }
};

}  // namespace js3c
