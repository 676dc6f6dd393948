#include "js3c/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace js3c {

void Visibility::merge(const Visibility& other) {
  require(spec == other.spec, "visibility merge: volume specs differ");
  for (std::size_t i = 0; i < state.size(); ++i)
    state[i] = std::max(state[i], other.state[i]);
}

namespace {

// Marks every cell the segment origin + t*d, t in [0,1], passes through.
void carve_segment(Visibility& vis, const Vec3& origin, const Vec3& d) {
  const VolumeSpec& spec = vis.spec;
  const Vec3 lo = spec.origin;
  const Vec3 hi = spec.max_corner();

  // clip the segment to the volume slab by slab
  double t0 = 0.0, t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] >= hi[a]) return;
      continue;
    }
    double ta = (lo[a] - origin[a]) / d[a];
    double tb = (hi[a] - origin[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return;

  const Vec3 entry = origin + t0 * d;
  std::array<long, 3> c = spec.cell_of(entry);
  for (int a = 0; a < 3; ++a)
    c[static_cast<std::size_t>(a)] = std::clamp(
        c[static_cast<std::size_t>(a)], 0L, spec.dims[static_cast<std::size_t>(a)] - 1);

  const double inf = std::numeric_limits<double>::infinity();
  std::array<long, 3> step{0, 0, 0};
  std::array<double, 3> t_max{inf, inf, inf};
  std::array<double, 3> t_delta{inf, inf, inf};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    step[static_cast<std::size_t>(a)] = d[a] > 0.0 ? 1 : -1;
    const long next = d[a] > 0.0 ? c[static_cast<std::size_t>(a)] + 1
                                 : c[static_cast<std::size_t>(a)];
    const double bound = lo[a] + static_cast<double>(next) * spec.voxel_size;
    t_max[static_cast<std::size_t>(a)] = (bound - origin[a]) / d[a];
    t_delta[static_cast<std::size_t>(a)] = spec.voxel_size / std::abs(d[a]);
  }

  while (true) {
    vis.mark_empty(spec.linear(c));
    int a = 0;
    if (t_max[1] < t_max[static_cast<std::size_t>(a)]) a = 1;
    if (t_max[2] < t_max[static_cast<std::size_t>(a)]) a = 2;
    if (t_max[static_cast<std::size_t>(a)] > t1) break;  // segment ends here
    c[static_cast<std::size_t>(a)] += step[static_cast<std::size_t>(a)];
    if (c[static_cast<std::size_t>(a)] < 0 ||
        c[static_cast<std::size_t>(a)] >= spec.dims[static_cast<std::size_t>(a)])
      break;
    t_max[static_cast<std::size_t>(a)] += t_delta[static_cast<std::size_t>(a)];
  }
}

}  // namespace

Visibility raycast_visibility(const PointCloud& frame, const Vec3& origin,
                              const VolumeSpec& spec) {
  spec.validate();
  require(origin.allFinite(), "raycast: non-finite origin");
  Visibility vis(spec);
  for (const Vec3& p : frame.positions) carve_segment(vis, origin, p - origin);
  for (const Vec3& p : frame.positions)
    if (spec.contains(p)) vis.mark_occupied(spec.linear(spec.cell_of(p)));
  return vis;
}

}  // namespace js3c
