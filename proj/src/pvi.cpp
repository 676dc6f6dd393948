#include "js3c/pvi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "js3c/ops.hpp"

namespace js3c {

VoxelCenters extract_voxel_centers(const ad::Tensor& coarse_logits,
                                   const VolumeSpec& spec) {
  require(coarse_logits.rank() == 4, "voxel centers: logits must be {dz, dy, dx, C+1}");
  require(coarse_logits.dim(0) == spec.dims[2] && coarse_logits.dim(1) == spec.dims[1] &&
              coarse_logits.dim(2) == spec.dims[0],
          "voxel centers: logits dims do not match volume spec");
  const long channels = coarse_logits.dim(3);
  require(channels >= 2, "voxel centers: need at least two channels");

  VoxelCenters out;
  const long cells = spec.num_cells();
  for (long cell = 0; cell < cells; ++cell) {
    const double* row = &coarse_logits.data[cell * channels];
    long best = 0;
    for (long j = 1; j < channels; ++j)
      if (row[j] > row[best]) best = j;
    if (best == 0) continue;
    out.cells.push_back(cell);
    out.positions.push_back(spec.center(spec.delinear(cell)));
  }
  return out;
}

std::vector<long> knn_brute(const Vec3& query, const std::vector<Vec3>& points,
                            int k) {
  require(k >= 1, "knn: k must be positive");
  require(static_cast<long>(points.size()) >= k, "knn: fewer points than k");
  std::vector<std::pair<double, long>> d;
  d.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    d.emplace_back((points[i] - query).squaredNorm(), static_cast<long>(i));
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<long> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  return out;
}

namespace {

// Uniform bucket grid over the point bounding box. Queries walk outward in
// Chebyshev rings; ring r cells are at least (r-1) * cell_size away, so the
// walk stops as soon as that bound passes the current k-th distance. The
// non-strict comparison keeps scanning while an equally distant, smaller
// index candidate could still appear.
class BucketGrid {
 public:
  BucketGrid(const std::vector<Vec3>& points, double cell)
      : points_(points), cell_(cell) {
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    for (int a = 0; a < 3; ++a) {
      dims_[a] = static_cast<long>(std::floor((hi[a] - lo[a]) / cell_)) + 1;
      dims_[a] = std::max<long>(dims_[a], 1);
    }
    buckets_.resize(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]));
    for (std::size_t i = 0; i < points.size(); ++i)
      buckets_[bucket_of(points[i])].push_back(static_cast<long>(i));
  }

  long num_buckets() const { return static_cast<long>(buckets_.size()); }

  std::vector<long> query(const Vec3& q, int k) const {
    std::array<long, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = static_cast<long>(std::floor((q[a] - origin_[a]) / cell_));
      c[a] = std::clamp<long>(c[a], 0, dims_[a] - 1);
    }
    // max-heap of the k best (squared distance, index) pairs
    std::priority_queue<std::pair<double, long>> best;
    const long max_ring = dims_[0] + dims_[1] + dims_[2];
    for (long ring = 0;; ++ring) {
      if (static_cast<int>(best.size()) == k) {
        const double bound = (static_cast<double>(ring) - 1.0) * cell_;
        if (bound > 0.0 && bound * bound > best.top().first) break;
      }
      if (ring > max_ring) break;
      visit_ring(c, ring, [&](long b) {
        for (long idx : buckets_[static_cast<std::size_t>(b)]) {
          const double d2 = (points_[static_cast<std::size_t>(idx)] - q).squaredNorm();
          const std::pair<double, long> cand{d2, idx};
          if (static_cast<int>(best.size()) < k)
            best.push(cand);
          else if (cand < best.top()) {
            best.pop();
            best.push(cand);
          }
        }
      });
    }
    std::vector<std::pair<double, long>> sorted;
    while (!best.empty()) {
      sorted.push_back(best.top());
      best.pop();
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<long> out;
    out.reserve(sorted.size());
    for (const auto& [d, i] : sorted) out.push_back(i);
    return out;
  }

 private:
  std::size_t bucket_of(const Vec3& p) const {
    std::array<long, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = static_cast<long>(std::floor((p[a] - origin_[a]) / cell_));
      c[a] = std::clamp<long>(c[a], 0, dims_[a] - 1);
    }
    return static_cast<std::size_t>(c[0] + dims_[0] * (c[1] + dims_[1] * c[2]));
  }

  template <typename F>
  void visit_ring(const std::array<long, 3>& c, long ring, F&& f) const {
    const long zlo = c[2] - ring, zhi = c[2] + ring;
    for (long z = zlo; z <= zhi; ++z) {
      if (z < 0 || z >= dims_[2]) continue;
      const bool z_face = z == zlo || z == zhi;
      for (long y = c[1] - ring; y <= c[1] + ring; ++y) {
        if (y < 0 || y >= dims_[1]) continue;
        const bool y_face = y == c[1] - ring || y == c[1] + ring;
        if (z_face || y_face) {
          for (long x = c[0] - ring; x <= c[0] + ring; ++x) {
            if (x < 0 || x >= dims_[0]) continue;
            f(x + dims_[0] * (y + dims_[1] * z));
          }
        } else {
          for (long x : {c[0] - ring, c[0] + ring}) {
            if (x < 0 || x >= dims_[0]) continue;
            f(x + dims_[0] * (y + dims_[1] * z));
          }
        }
      }
    }
  }

  const std::vector<Vec3>& points_;
  double cell_;
  Vec3 origin_;
  std::array<long, 3> dims_{};
  std::vector<std::vector<long>> buckets_;
};

}  // namespace

KnnGraph knn_query(const std::vector<Vec3>& queries,
                   const std::vector<Vec3>& points, int k) {
  require(k >= 1, "knn: k must be positive");
  require(!points.empty(), "knn: empty point set");
  require(static_cast<long>(points.size()) >= k, "knn: fewer points than k");

  KnnGraph g;
  g.k = k;
  g.neighbors.reserve(queries.size() * static_cast<std::size_t>(k));

  // Bucket size from the average point spacing; fall back to a linear scan
  // when the spread is degenerate or the table would dwarf the data.
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double spread = (hi - lo).maxCoeff();
  const double cell =
      spread > 0.0
          ? std::max(spread / 64.0,
                     std::cbrt(spread * spread * spread /
                               static_cast<double>(points.size())))
          : 0.0;

  if (!(cell > 0.0) || !std::isfinite(cell)) {
    for (const Vec3& q : queries) {
      const auto nb = knn_brute(q, points, k);
      g.neighbors.insert(g.neighbors.end(), nb.begin(), nb.end());
    }
    return g;
  }

  BucketGrid grid(points, cell);
  for (const Vec3& q : queries) {
    const auto nb = grid.query(q, k);
    g.neighbors.insert(g.neighbors.end(), nb.begin(), nb.end());
  }
  return g;
}

namespace ad::pvi {

int refine(Tape& t, int coarse_volume, const VolumeSpec& spec,
           const VoxelCenters& centers, const KnnGraph& graph,
           const std::vector<Vec3>& points, int point_feats,
           const PviNodes& nodes, double leaky_slope) {
  // Copy the shape: tape storage reallocates as nodes are appended below.
  const std::vector<long> vol_shape = t.val(coarse_volume).shape;
  require(vol_shape.size() == 4, "pvi refine: volume must be {dz, dy, dx, C+1}");
  require(!nodes.layers.empty(), "pvi refine: at least one layer required");
  const long nc = static_cast<long>(centers.cells.size());
  if (nc == 0) return coarse_volume;

  const long channels = vol_shape[3];
  const long cells = spec.num_cells();
  const int k = graph.k;
  require(static_cast<long>(graph.neighbors.size()) == nc * k,
          "pvi refine: graph size does not match centre count");

  const int flat = ops::reshape(t, coarse_volume, {cells, channels});
  std::vector<int> center_rows(centers.cells.begin(), centers.cells.end());
  int f_center = ops::gather_rows(t, flat, center_rows);

  // Blocked matrix kernels round by row position, so the edge matrix must be
  // assembled in a canonical row order for the output to be a function of
  // the neighbour set alone. Sorting each block by (squared distance, id)
  // reproduces the order knn_query emits, so graphs straight from the query
  // are rebuilt unchanged.
  std::vector<long> order(graph.neighbors);
  {
    std::vector<std::pair<double, long>> block(static_cast<std::size_t>(k));
    for (long i = 0; i < nc; ++i) {
      const Vec3& pi = centers.positions[static_cast<std::size_t>(i)];
      for (int j = 0; j < k; ++j) {
        const long pj = order[static_cast<std::size_t>(i * k + j)];
        block[static_cast<std::size_t>(j)] = {
            (points[static_cast<std::size_t>(pj)] - pi).squaredNorm(), pj};
      }
      std::sort(block.begin(), block.end());
      for (int j = 0; j < k; ++j)
        order[static_cast<std::size_t>(i * k + j)] =
            block[static_cast<std::size_t>(j)].second;
    }
  }

  // Constant geometry blocks: [p_i] and [p_i - p_j] per edge.
  Tensor pos_i({nc * k, 3});
  Tensor pos_diff({nc * k, 3});
  std::vector<int> rep_i(static_cast<std::size_t>(nc * k));
  std::vector<int> gather_j(static_cast<std::size_t>(nc * k));
  for (long i = 0; i < nc; ++i) {
    for (int j = 0; j < k; ++j) {
      const long e = i * k + j;
      const long pj = order[static_cast<std::size_t>(e)];
      rep_i[static_cast<std::size_t>(e)] = static_cast<int>(i);
      gather_j[static_cast<std::size_t>(e)] = static_cast<int>(pj);
      const Vec3& pi = centers.positions[static_cast<std::size_t>(i)];
      const Vec3 d = pi - points[static_cast<std::size_t>(pj)];
      for (int a = 0; a < 3; ++a) {
        pos_i.data[e * 3 + a] = pi[a];
        pos_diff.data[e * 3 + a] = d[a];
      }
    }
  }
  const int pos_i_node = t.leaf(std::move(pos_i));
  const int pos_diff_node = t.leaf(std::move(pos_diff));

  int agg = -1;
  for (const LayerNodes& ln : nodes.layers) {
    const int f_point = ops::linear(t, point_feats, ln.proj_w, ln.proj_b);
    const int f_i = ops::gather_rows(t, f_center, rep_i);
    const int f_j = ops::gather_rows(t, f_point, gather_j);
    const int neg_fj = ops::mul_scalar(t, f_j, -1.0);
    const int f_diff = ops::add(t, f_i, neg_fj);
    const int left = ops::concat_last(t, pos_i_node, f_i);
    const int right = ops::concat_last(t, pos_diff_node, f_diff);
    const int edge_in = ops::concat_last(t, left, right);
    int h = ops::leaky_relu(t, ops::linear(t, edge_in, ln.w1, ln.b1), leaky_slope);
    h = ops::leaky_relu(t, ops::linear(t, h, ln.w2, ln.b2), leaky_slope);
    h = ops::leaky_relu(t, ops::linear(t, h, ln.w3, ln.b3), leaky_slope);
    agg = ops::rowgroup_max(t, h, k);
    f_center = agg;
  }

  const int delta = ops::linear(t, agg, nodes.head_w, nodes.head_b);
  const int refined_flat = ops::scatter_add_rows(t, flat, delta, center_rows);
  return ops::reshape(t, refined_flat, vol_shape);
}

}  // namespace ad::pvi

}  // namespace js3c
