#include "js3c/sparse_conv.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

#include "js3c/ops.hpp"

namespace js3c {

Rulebook build_rulebook(const SparseTensor& input, int kernel_size) {
  require(kernel_size >= 1 && kernel_size % 2 == 1,
          "rulebook: kernel size must be odd and positive");
  input.validate();
  const int k3 = kernel_size * kernel_size * kernel_size;
  const long m = input.num_sites();

  Rulebook rb;
  rb.kernel_size = kernel_size;
  rb.num_sites = m;
  rb.pairs.resize(static_cast<std::size_t>(k3));

  // Outer loop over output sites keeps every offset list sorted by
  // output_row without an explicit sort.
  for (long j = 0; j < m; ++j) {
    const auto& cj = input.coords[static_cast<std::size_t>(j)];
    for (int o = 0; o < k3; ++o) {
      const auto d = Rulebook::offset_of(o, kernel_size);
      const std::array<int, 3> ci{cj[0] + d[0], cj[1] + d[1], cj[2] + d[2]};
      const long i = input.find(ci);
      if (i >= 0)
        rb.pairs[static_cast<std::size_t>(o)].emplace_back(static_cast<int>(i),
                                                           static_cast<int>(j));
    }
  }
  return rb;
}

SparsePoolMap build_pool_map(const SparseTensor& input) {
  input.validate();
  const long m = input.num_sites();
  auto floor_div2 = [](int v) { return v >= 0 ? v / 2 : (v - 1) / 2; };

  std::vector<std::array<int, 3>> parents(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    const auto& c = input.coords[static_cast<std::size_t>(i)];
    parents[static_cast<std::size_t>(i)] = {floor_div2(c[0]), floor_div2(c[1]),
                                            floor_div2(c[2])};
  }

  std::vector<std::array<int, 3>> uniq = parents;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  CoordIndex parent_index(uniq);

  SparsePoolMap pm;
  pm.parent_coords = std::move(uniq);
  pm.parent_of_child.resize(static_cast<std::size_t>(m));
  pm.children_of_parent.resize(pm.parent_coords.size());
  for (long i = 0; i < m; ++i) {
    const long p = parent_index.find(parents[static_cast<std::size_t>(i)]);
    pm.parent_of_child[static_cast<std::size_t>(i)] = p;
    pm.children_of_parent[static_cast<std::size_t>(p)].push_back(i);
  }
  return pm;
}

namespace ad::sparse {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int submanifold_conv(Tape& t, int x, int w, int b, const Rulebook& rb) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  require(xv.rank() == 2, "submanifold conv: features must be rank 2");
  require(wv.rank() == 3, "submanifold conv: weights must be {K^3, Fin, Fout}");
  const int k3 = rb.kernel_size * rb.kernel_size * rb.kernel_size;
  require(wv.dim(0) == k3, "submanifold conv: weight offset count mismatch");
  require(wv.dim(1) == xv.dim(1), "submanifold conv: input channel mismatch");
  require(xv.dim(0) == rb.num_sites, "submanifold conv: rulebook site count mismatch");

  const long m = xv.dim(0), fin = xv.dim(1), fout = wv.dim(2);
  Tensor out({m, fout});
  if (b >= 0) {
    const Tensor& bv = t.val(b);
    require(bv.numel() == fout, "submanifold conv: bias length mismatch");
    for (long j = 0; j < m; ++j)
      std::copy_n(bv.data.data(), fout, &out.data[j * fout]);
  }

  // Per offset: gather input rows, one GEMM, scatter-add to outputs.
  RowMat gathered, product;
  for (int o = 0; o < k3; ++o) {
    const auto& pairs = rb.pairs[static_cast<std::size_t>(o)];
    if (pairs.empty()) continue;
    const long np = static_cast<long>(pairs.size());
    gathered.resize(np, fin);
    for (long p = 0; p < np; ++p)
      gathered.row(p) = ConstMatMap(&xv.data[static_cast<long>(pairs[p].first) * fin], 1, fin);
    ConstMatMap wo(&wv.data[static_cast<long>(o) * fin * fout], fin, fout);
    product.noalias() = gathered * wo;
    for (long p = 0; p < np; ++p) {
      double* dst = &out.data[static_cast<long>(pairs[p].second) * fout];
      const double* src = product.row(p).data();
      for (long j = 0; j < fout; ++j) dst[j] += src[j];
    }
  }

  std::vector<int> ins{x, w};
  if (b >= 0) ins.push_back(b);
  const Rulebook* rbp = &rb;
  return t.node(std::move(out), std::move(ins),
                [x, w, b, rbp, fin, fout, k3](Tape& tp, int onode) {
                  const Tensor& go = tp.grad(onode);
                  const Tensor& xm = tp.val(x);
                  const Tensor& wm = tp.val(w);
                  Tensor& gx = tp.grad_mut(x);
                  Tensor& gw = tp.grad_mut(w);
                  RowMat gout, gin, xin;
                  for (int o = 0; o < k3; ++o) {
                    const auto& pairs = rbp->pairs[static_cast<std::size_t>(o)];
                    if (pairs.empty()) continue;
                    const long np = static_cast<long>(pairs.size());
                    gout.resize(np, fout);
                    xin.resize(np, fin);
                    for (long p = 0; p < np; ++p) {
                      gout.row(p) = ConstMatMap(
                          &go.data[static_cast<long>(pairs[p].second) * fout], 1, fout);
                      xin.row(p) = ConstMatMap(
                          &xm.data[static_cast<long>(pairs[p].first) * fin], 1, fin);
                    }
                    ConstMatMap wo(&wm.data[static_cast<long>(o) * fin * fout], fin, fout);
                    gin.noalias() = gout * wo.transpose();
                    for (long p = 0; p < np; ++p) {
                      double* dst = &gx.data[static_cast<long>(pairs[p].first) * fin];
                      for (long j = 0; j < fin; ++j) dst[j] += gin(p, j);
                    }
                    MatMap gwo(&gw.data[static_cast<long>(o) * fin * fout], fin, fout);
                    gwo.noalias() += xin.transpose() * gout;
                  }
                  if (b >= 0) {
                    Tensor& gb = tp.grad_mut(b);
                    const long m = go.dim(0);
                    for (long j = 0; j < m; ++j)
                      for (long c = 0; c < fout; ++c)
                        gb.data[c] += go.data[j * fout + c];
                  }
                });
}

int sparse_max_pool(Tape& t, int x, const SparsePoolMap& pm) {
  const Tensor& xv = t.val(x);
  require(xv.rank() == 2, "sparse pool: features must be rank 2");
  require(xv.dim(0) == static_cast<long>(pm.parent_of_child.size()),
          "sparse pool: map child count mismatch");
  const long f = xv.dim(1);
  const long np = static_cast<long>(pm.parent_coords.size());
  Tensor out({np, f});
  auto argmax = std::make_shared<std::vector<long>>(static_cast<std::size_t>(np * f));
  for (long p = 0; p < np; ++p) {
    const auto& kids = pm.children_of_parent[static_cast<std::size_t>(p)];
    for (long j = 0; j < f; ++j) {
      long best = kids[0];
      double bv = xv.data[best * f + j];
      for (std::size_t k = 1; k < kids.size(); ++k) {
        const double v = xv.data[kids[k] * f + j];
        if (v > bv) {
          bv = v;
          best = kids[k];
        }
      }
      out.data[p * f + j] = bv;
      (*argmax)[static_cast<std::size_t>(p * f + j)] = best;
    }
  }
  return t.node(std::move(out), {x}, [x, np, f, argmax](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < np * f; ++i)
      gx.data[(*argmax)[static_cast<std::size_t>(i)] * f + i % f] += go.data[i];
  });
}

int sparse_unpool(Tape& t, int x, const SparsePoolMap& pm) {
  const Tensor& xv = t.val(x);
  require(xv.rank() == 2, "sparse unpool: features must be rank 2");
  require(xv.dim(0) == static_cast<long>(pm.parent_coords.size()),
          "sparse unpool: map parent count mismatch");
  std::vector<int> idx(pm.parent_of_child.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<int>(pm.parent_of_child[i]);
  return ops::gather_rows(t, x, std::move(idx));
}

}  // namespace ad::sparse

}  // namespace js3c
