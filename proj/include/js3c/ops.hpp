#pragma once

#include <vector>

#include "js3c/tape.hpp"

namespace js3c::ad::ops {

// Generic tape vocabulary shared by the sparse and dense network paths.
// Every op computes its value eagerly and registers an exact adjoint.
// Tensors with rank > 2 are treated as {numel/last, last} row matrices
// where a row op is applied.

// y = x @ w + b. x {N,Fin}, w {Fin,Fout}, b {Fout} or -1 for no bias.
int linear(Tape& t, int x, int w, int b);

// Elementwise sum, identical shapes.
int add(Tape& t, int a, int b);

// Elementwise product, identical shapes.
int mul_elem(Tape& t, int a, int b);

// Per-channel y = x * scale[c] + shift[c] over the trailing dimension.
int channel_affine(Tape& t, int x, int scale, int shift);

int relu(Tape& t, int x);
int leaky_relu(Tape& t, int x, double negative_slope);

// Concatenation along the trailing dimension; leading dims must match.
int concat_last(Tape& t, int a, int b);

// Row-wise softmax over the trailing dimension, max-shifted.
int softmax_rows(Tape& t, int x);

// Metadata-only reshape to an equal-numel shape.
int reshape(Tape& t, int x, std::vector<long> shape);

// out[i, :] = x[idx[i], :]. Duplicate indices allowed; adjoint scatter-adds.
int gather_rows(Tape& t, int x, std::vector<int> idx);

// out has out_rows rows; out[r] = mean of x rows i with row_of[i] == r,
// zero where no row maps. Adjoint divides by the member count.
int scatter_mean_rows(Tape& t, int x, std::vector<int> row_of, long out_rows);

// out = base; out[rows[i], :] += delta[i, :]. Rows may repeat.
int scatter_add_rows(Tape& t, int base, int delta, std::vector<int> rows);

// x {G*group, F} -> {G, F}, componentwise max over each group of `group`
// consecutive rows. Ties route the adjoint to the earliest row.
int rowgroup_max(Tape& t, int x, long group);

int reduce_sum(Tape& t, int x);
int reduce_mean(Tape& t, int x);

// exp, elementwise (used by uncertainty weighting and tests).
int exp_elem(Tape& t, int x);

int mul_scalar(Tape& t, int x, double s);

}  // namespace js3c::ad::ops
