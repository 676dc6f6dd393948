#pragma once

#include <array>
#include <vector>

#include "js3c/sparse_tensor.hpp"
#include "js3c/tape.hpp"

namespace js3c {

// Gather/scatter plan for one submanifold convolution. For kernel size K
// (odd), offset index o enumerates displacements d in [-r, r]^3 with
// d.x fastest: o = (d.x+r) + K*((d.y+r) + K*(d.z+r)), r = (K-1)/2.
// pairs[o] lists (input_row, output_row) with coords[in] = coords[out] + d,
// sorted by output_row. Output sites equal input sites, so the center
// offset holds exactly one identity pair per site.
struct Rulebook {
  int kernel_size = 0;
  long num_sites = 0;
  std::vector<std::vector<std::pair<int, int>>> pairs;

  long total_pairs() const {
    long n = 0;
    for (const auto& v : pairs) n += static_cast<long>(v.size());
    return n;
  }

  static std::array<int, 3> offset_of(int o, int kernel_size) {
    const int r = (kernel_size - 1) / 2;
    return {o % kernel_size - r, (o / kernel_size) % kernel_size - r,
            o / (kernel_size * kernel_size) - r};
  }
};

Rulebook build_rulebook(const SparseTensor& input, int kernel_size);

// Parent/child plan for stride-2 sparse max pooling. Parent coordinates are
// the unique floor(child/2) triples in lexicographic order; children of a
// parent are listed by ascending child row.
struct SparsePoolMap {
  std::vector<std::array<int, 3>> parent_coords;
  std::vector<long> parent_of_child;
  std::vector<std::vector<long>> children_of_parent;
};

SparsePoolMap build_pool_map(const SparseTensor& input);

namespace ad::sparse {

// y[j] = b + sum_o sum_{(i,j) in pairs[o]} x[i] * w[o].
// x {M,Fin}, w {K^3,Fin,Fout}, b {Fout} or -1.
// The rulebook is captured by pointer and must outlive the tape's backward
// pass (plans live in the per-step forward context).
int submanifold_conv(Tape& t, int x, int w, int b, const Rulebook& rb);

// Componentwise max over each parent's children; ties route the adjoint to
// the earliest child row.
int sparse_max_pool(Tape& t, int x, const SparsePoolMap& pm);

// Copies each parent row to all of its children (inverse of pooling on the
// coordinate sets); adjoint sums child gradients into the parent.
int sparse_unpool(Tape& t, int x, const SparsePoolMap& pm);

}  // namespace ad::sparse

}  // namespace js3c
