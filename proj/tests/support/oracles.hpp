#pragma once

// Reference implementations used only by tests. Each one is written the
// slow, obvious way and never calls into the code path it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "js3c/geometry.hpp"

namespace oracles {

// Plain dense 3-D cross-correlation over a {dz, dy, dx, Cin} volume with
// zero padding, stride 1, odd kernel. Weight w[o][ci][co] uses the same
// x-fastest offset order as the library.
inline std::vector<double> dense_conv3d(const std::vector<double>& in, long nz,
                                        long ny, long nx, long cin,
                                        const std::vector<double>& w, int k,
                                        long cout, const std::vector<double>& bias) {
  const int r = (k - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(nz * ny * nx * cout), 0.0);
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long x = 0; x < nx; ++x)
        for (long co = 0; co < cout; ++co) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
          for (int kz = 0; kz < k; ++kz)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const long iz = z + kz - r, iy = y + ky - r, ix = x + kx - r;
                if (iz < 0 || iz >= nz || iy < 0 || iy >= ny || ix < 0 || ix >= nx)
                  continue;
                const long o = kx + static_cast<long>(k) * (ky + static_cast<long>(k) * kz);
                for (long ci = 0; ci < cin; ++ci)
                  acc += in[static_cast<std::size_t>((((iz * ny + iy) * nx + ix) * cin + ci))] *
                         w[static_cast<std::size_t>((o * cin + ci) * cout + co)];
              }
          out[static_cast<std::size_t>((((z * ny + y) * nx + x) * cout + co))] = acc;
        }
  return out;
}

// Exact k nearest neighbours by linear scan. Ties resolve to the smaller
// point index via the (distance, index) pair order.
inline std::vector<long> brute_knn(const js3c::Vec3& query,
                                   const std::vector<js3c::Vec3>& points, int k) {
  std::vector<std::pair<double, long>> d;
  d.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    d.emplace_back((points[i] - query).squaredNorm(), static_cast<long>(i));
  std::sort(d.begin(), d.end());
  std::vector<long> out;
  for (int i = 0; i < k && i < static_cast<int>(d.size()); ++i)
    out.push_back(d[static_cast<std::size_t>(i)].second);
  return out;
}

// Cells touched by the segment origin -> end, by sampling the line at a
// tenth of the voxel size. Includes both endpoint cells when inside.
inline std::set<long> sampled_ray_cells(const js3c::VolumeSpec& spec,
                                        const js3c::Vec3& origin,
                                        const js3c::Vec3& end) {
  std::set<long> cells;
  const double len = (end - origin).norm();
  const double step = spec.voxel_size / 10.0;
  const long n = std::max<long>(1, static_cast<long>(std::ceil(len / step)));
  for (long i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const js3c::Vec3 p = origin + t * (end - origin);
    const auto c = spec.cell_of(p);
    if (spec.in_bounds(c)) cells.insert(spec.linear(c));
  }
  return cells;
}

// Histogram majority vote with the same tie/ignore policy as the library:
// drop zeros unless everything is zero, smallest label wins ties.
inline std::int32_t vote(const std::vector<std::int32_t>& labels) {
  std::map<std::int32_t, long> hist;
  for (std::int32_t l : labels)
    if (l != 0) ++hist[l];
  if (hist.empty()) return 0;
  std::int32_t best = 0;
  long best_count = 0;
  for (const auto& [label, count] : hist)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

// Exact cell set for a segment: collects every grid-plane crossing parameter
// inside the clipped range, then samples the midpoint of each consecutive
// interval. One sample lands in every cell the segment overlaps, however
// briefly, which fixed-step sampling can miss at corner clips.
inline std::set<long> exact_ray_cells(const js3c::VolumeSpec& spec,
                                      const js3c::Vec3& origin,
                                      const js3c::Vec3& end) {
  const js3c::Vec3 d = end - origin;
  const js3c::Vec3 lo = spec.origin;
  const js3c::Vec3 hi = spec.max_corner();

  double t0 = 0.0, t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] >= hi[a]) return {};
      continue;
    }
    double ta = (lo[a] - origin[a]) / d[a];
    double tb = (hi[a] - origin[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return {};

  std::vector<double> ts{t0, t1};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    for (long plane = 0; plane <= spec.dims[static_cast<std::size_t>(a)]; ++plane) {
      const double coord = lo[a] + static_cast<double>(plane) * spec.voxel_size;
      const double t = (coord - origin[a]) / d[a];
      if (t > t0 && t < t1) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::set<long> cells;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double mid = 0.5 * (ts[i] + ts[i + 1]);
    const js3c::Vec3 p = origin + mid * d;
    const auto c = spec.cell_of(p);
    if (spec.in_bounds(c)) cells.insert(spec.linear(c));
  }
  return cells;
}

}  // namespace oracles
