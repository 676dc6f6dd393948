#pragma once

#include <vector>

#include "js3c/geometry.hpp"
#include "js3c/tape.hpp"

namespace js3c {

// Voxels the coarse completion head considers non-empty: argmax over the
// C+1 channels differs from the empty channel 0 (exact ties resolve to the
// lowest channel, hence to empty).
struct VoxelCenters {
  std::vector<long> cells;      // linear cell ids in the volume
  std::vector<Vec3> positions;  // cell centers in metres
};

VoxelCenters extract_voxel_centers(const ad::Tensor& coarse_logits,
                                   const VolumeSpec& spec);

// k nearest points for each query, exact. neighbors is row-major
// {num_queries, k}; distance ties resolve to the smaller point index.
struct KnnGraph {
  int k = 0;
  std::vector<long> neighbors;
};

// Uniform-grid accelerated search with a linear-scan fallback for
// degenerate distributions. Results are identical to the brute-force scan.
KnnGraph knn_query(const std::vector<Vec3>& queries,
                   const std::vector<Vec3>& points, int k);

std::vector<long> knn_brute(const Vec3& query, const std::vector<Vec3>& points,
                            int k);

namespace ad::pvi {

// One graph layer's weights as tape node ids: a projection taking the
// point-side features to the centre-feature width, and the three-layer
// edge perceptron.
struct LayerNodes {
  int proj_w = -1, proj_b = -1;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
};

struct PviNodes {
  std::vector<LayerNodes> layers;
  int head_w = -1, head_b = -1;
};

// Residual refinement of a coarse completion volume {dz, dy, dx, C+1}.
// Per layer, every centre i with neighbour point j contributes the edge
//   e_ij = mlp([p_i, f_i, p_i - p_j, f_i - f_j])
// (f_j being the projected point feature), centres aggregate by
// componentwise max over their k edges, and after the last layer a linear
// head maps the aggregate to a (C+1)-wide delta added onto the centre's
// cell. Cells without centres pass through unchanged; no centres at all
// returns the input node itself.
int refine(Tape& t, int coarse_volume, const VolumeSpec& spec,
           const VoxelCenters& centers, const KnnGraph& graph,
           const std::vector<Vec3>& points, int point_feats,
           const PviNodes& nodes, double leaky_slope);

}  // namespace ad::pvi

}  // namespace js3c
