#pragma once

#include <array>

#include "js3c/tape.hpp"

namespace js3c::ad::dense {

// Dense volume tensors have shape {dz, dy, dx, C}: cells ordered x-fastest
// (matching the labeled-volume linear index) with channels innermost.

// 3-D cross-correlation with zero padding:
//   out(z,y,x) = b + sum_k in(z*s-p+kz, y*s-p+ky, x*s-p+kx) * w[k]
// w {K^3, Cin, Cout} indexed with kx fastest, matching the sparse rulebook
// offset order. Output spatial dims: (n + 2*pad - K) / stride + 1.
int conv3d(Tape& t, int x, int w, int b, long stride, long pad);

// 2x2x2 max pooling, stride 2, partial windows at the high edge (output
// dims are ceil(n/2)). Ties route the adjoint to the lowest linear index.
int max_pool3d(Tape& t, int x);

// Inverse-pixel-shuffle upsampling: input {dz, dy, dx, c*r^3} rearranges to
// {dz*r, dy*r, dx*r, c} with
//   out(z,y,x,ch) = in(z/r, y/r, x/r, ch*r^3 + off(x%r, y%r, z%r)),
//   off(i,j,k) = i + r*(j + r*k).
// Bijective on elements, so exactly invertible.
int voxel_shuffle(Tape& t, int x, long r);

// Exact inverse rearrangement of voxel_shuffle.
int voxel_unshuffle(Tape& t, int x, long r);

inline long conv_out_dim(long n, long k, long stride, long pad) {
  return (n + 2 * pad - k) / stride + 1;
}

}  // namespace js3c::ad::dense
