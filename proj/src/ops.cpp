#include "js3c/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace js3c::ad::ops {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

namespace {

ConstMatMap as_rows(const Tensor& t) {
  return ConstMatMap(t.data.data(), t.rows(), t.cols());
}

MatMap as_rows(Tensor& t) { return MatMap(t.data.data(), t.rows(), t.cols()); }

}  // namespace

int linear(Tape& t, int x, int w, int b) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  require(xv.rank() >= 1 && wv.rank() == 2, "linear: bad operand ranks");
  require(xv.cols() == wv.dim(0), "linear: inner dimensions disagree");
  const long n = xv.rows(), fin = wv.dim(0), fout = wv.dim(1);

  std::vector<long> out_shape = xv.shape;
  out_shape.back() = fout;
  Tensor out(std::move(out_shape));
  as_rows(out).noalias() = as_rows(xv) * as_rows(wv);

  std::vector<int> ins{x, w};
  if (b >= 0) {
    const Tensor& bv = t.val(b);
    require(bv.numel() == fout, "linear: bias length mismatch");
    as_rows(out).rowwise() += ConstVecMap(bv.data.data(), fout).transpose();
    ins.push_back(b);
  }

  return t.node(std::move(out), std::move(ins),
                [x, w, b, n, fin, fout](Tape& tp, int o) {
                  ConstMatMap go = as_rows(tp.grad(o));
                  ConstMatMap xm = as_rows(tp.val(x));
                  ConstMatMap wm = as_rows(tp.val(w));
                  as_rows(tp.grad_mut(x)).noalias() += go * wm.transpose();
                  as_rows(tp.grad_mut(w)).noalias() += xm.transpose() * go;
                  if (b >= 0) {
                    VecMap gb(tp.grad_mut(b).data.data(), fout);
                    gb += go.colwise().sum().transpose();
                  }
                  (void)n;
                  (void)fin;
                });
}

int add(Tape& t, int a, int b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.same_shape(bv), "add: shape mismatch");
  Tensor out(av.shape);
  for (long i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
  return t.node(std::move(out), {a, b}, [a, b](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& ga = tp.grad_mut(a);
    Tensor& gb = tp.grad_mut(b);
    for (long i = 0; i < go.numel(); ++i) {
      ga.data[i] += go.data[i];
      gb.data[i] += go.data[i];
    }
  });
}

int mul_elem(Tape& t, int a, int b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.same_shape(bv), "mul_elem: shape mismatch");
  Tensor out(av.shape);
  for (long i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * bv.data[i];
  return t.node(std::move(out), {a, b}, [a, b](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    const Tensor& av2 = tp.val(a);
    const Tensor& bv2 = tp.val(b);
    Tensor& ga = tp.grad_mut(a);
    Tensor& gb = tp.grad_mut(b);
    for (long i = 0; i < go.numel(); ++i) {
      ga.data[i] += go.data[i] * bv2.data[i];
      gb.data[i] += go.data[i] * av2.data[i];
    }
  });
}

int channel_affine(Tape& t, int x, int scale, int shift) {
  const Tensor& xv = t.val(x);
  const Tensor& sv = t.val(scale);
  const Tensor& bv = t.val(shift);
  const long c = xv.cols();
  require(sv.numel() == c && bv.numel() == c, "channel_affine: channel count mismatch");
  Tensor out(xv.shape);
  const long rows = xv.rows();
  for (long r = 0; r < rows; ++r)
    for (long j = 0; j < c; ++j)
      out.data[r * c + j] = xv.data[r * c + j] * sv.data[j] + bv.data[j];
  return t.node(std::move(out), {x, scale, shift},
                [x, scale, shift, rows, c](Tape& tp, int o) {
                  const Tensor& go = tp.grad(o);
                  const Tensor& xm = tp.val(x);
                  const Tensor& sm = tp.val(scale);
                  Tensor& gx = tp.grad_mut(x);
                  Tensor& gs = tp.grad_mut(scale);
                  Tensor& gb = tp.grad_mut(shift);
                  for (long r = 0; r < rows; ++r)
                    for (long j = 0; j < c; ++j) {
                      const double g = go.data[r * c + j];
                      gx.data[r * c + j] += g * sm.data[j];
                      gs.data[j] += g * xm.data[r * c + j];
                      gb.data[j] += g;
                    }
                });
}

namespace {

int leaky_impl(Tape& t, int x, double slope) {
  const Tensor& xv = t.val(x);
  Tensor out(xv.shape);
  for (long i = 0; i < xv.numel(); ++i) {
    const double v = xv.data[i];
    out.data[i] = v > 0.0 ? v : slope * v;
  }
  return t.node(std::move(out), {x}, [x, slope](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    const Tensor& xm = tp.val(x);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < go.numel(); ++i)
      gx.data[i] += go.data[i] * (xm.data[i] > 0.0 ? 1.0 : slope);
  });
}

}  // namespace

int relu(Tape& t, int x) { return leaky_impl(t, x, 0.0); }

int leaky_relu(Tape& t, int x, double negative_slope) {
  return leaky_impl(t, x, negative_slope);
}

int concat_last(Tape& t, int a, int b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.rank() == bv.rank() && av.rank() >= 1, "concat_last: rank mismatch");
  for (int i = 0; i + 1 < av.rank(); ++i)
    require(av.dim(i) == bv.dim(i), "concat_last: leading dimension mismatch");
  const long rows = av.rows(), ca = av.cols(), cb = bv.cols();
  std::vector<long> shape = av.shape;
  shape.back() = ca + cb;
  Tensor out(std::move(shape));
  for (long r = 0; r < rows; ++r) {
    std::copy_n(&av.data[r * ca], ca, &out.data[r * (ca + cb)]);
    std::copy_n(&bv.data[r * cb], cb, &out.data[r * (ca + cb) + ca]);
  }
  return t.node(std::move(out), {a, b}, [a, b, rows, ca, cb](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& ga = tp.grad_mut(a);
    Tensor& gb = tp.grad_mut(b);
    for (long r = 0; r < rows; ++r) {
      for (long j = 0; j < ca; ++j) ga.data[r * ca + j] += go.data[r * (ca + cb) + j];
      for (long j = 0; j < cb; ++j) gb.data[r * cb + j] += go.data[r * (ca + cb) + ca + j];
    }
  });
}

int softmax_rows(Tape& t, int x) {
  const Tensor& xv = t.val(x);
  const long rows = xv.rows(), k = xv.cols();
  require(k >= 1, "softmax_rows: empty rows");
  Tensor out(xv.shape);
  for (long r = 0; r < rows; ++r) {
    const double* in = &xv.data[r * k];
    double* po = &out.data[r * k];
    double mx = in[0];
    for (long j = 1; j < k; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (long j = 0; j < k; ++j) {
      po[j] = std::exp(in[j] - mx);
      sum += po[j];
    }
    for (long j = 0; j < k; ++j) po[j] /= sum;
  }
  return t.node(std::move(out), {x}, [x, rows, k](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    const Tensor& s = tp.val(o);
    Tensor& gx = tp.grad_mut(x);
    for (long r = 0; r < rows; ++r) {
      const double* sr = &s.data[r * k];
      const double* gr = &go.data[r * k];
      double dot = 0.0;
      for (long j = 0; j < k; ++j) dot += sr[j] * gr[j];
      for (long j = 0; j < k; ++j) gx.data[r * k + j] += sr[j] * (gr[j] - dot);
    }
  });
}

int reshape(Tape& t, int x, std::vector<long> shape) {
  const Tensor& xv = t.val(x);
  require(Tensor::numel_of(shape) == xv.numel(), "reshape: element count changed");
  Tensor out(std::move(shape), std::vector<double>(xv.data));
  return t.node(std::move(out), {x}, [x](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i];
  });
}

int gather_rows(Tape& t, int x, std::vector<int> idx) {
  const Tensor& xv = t.val(x);
  const long rows = xv.rows(), f = xv.cols();
  for (int i : idx)
    require(i >= 0 && i < rows, "gather_rows: index out of range");
  Tensor out({static_cast<long>(idx.size()), f});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(&xv.data[static_cast<long>(idx[r]) * f], f, &out.data[static_cast<long>(r) * f]);
  auto indices = std::make_shared<std::vector<int>>(std::move(idx));
  return t.node(std::move(out), {x}, [x, f, indices](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (std::size_t r = 0; r < indices->size(); ++r) {
      const double* src = &go.data[static_cast<long>(r) * f];
      double* dst = &gx.data[static_cast<long>((*indices)[r]) * f];
      for (long j = 0; j < f; ++j) dst[j] += src[j];
    }
  });
}

int scatter_mean_rows(Tape& t, int x, std::vector<int> row_of, long out_rows) {
  const Tensor& xv = t.val(x);
  const long n = xv.rows(), f = xv.cols();
  require(static_cast<long>(row_of.size()) == n, "scatter_mean_rows: map length mismatch");
  for (int r : row_of)
    require(r >= 0 && r < out_rows, "scatter_mean_rows: target row out of range");
  auto counts = std::make_shared<std::vector<long>>(out_rows, 0);
  for (int r : row_of) ++(*counts)[static_cast<std::size_t>(r)];
  Tensor out({out_rows, f});
  for (long i = 0; i < n; ++i) {
    double* dst = &out.data[static_cast<long>(row_of[static_cast<std::size_t>(i)]) * f];
    const double* src = &xv.data[i * f];
    for (long j = 0; j < f; ++j) dst[j] += src[j];
  }
  for (long r = 0; r < out_rows; ++r) {
    const long c = (*counts)[static_cast<std::size_t>(r)];
    if (c > 1) {
      double* dst = &out.data[r * f];
      for (long j = 0; j < f; ++j) dst[j] /= static_cast<double>(c);
    }
  }
  auto map = std::make_shared<std::vector<int>>(std::move(row_of));
  return t.node(std::move(out), {x}, [x, f, map, counts](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (std::size_t i = 0; i < map->size(); ++i) {
      const long r = (*map)[i];
      const double inv = 1.0 / static_cast<double>((*counts)[static_cast<std::size_t>(r)]);
      const double* src = &go.data[r * f];
      double* dst = &gx.data[static_cast<long>(i) * f];
      for (long j = 0; j < f; ++j) dst[j] += src[j] * inv;
    }
  });
}

int scatter_add_rows(Tape& t, int base, int delta, std::vector<int> rows) {
  const Tensor& bv = t.val(base);
  const Tensor& dv = t.val(delta);
  const long f = bv.cols();
  require(dv.cols() == f, "scatter_add_rows: feature width mismatch");
  require(dv.rows() == static_cast<long>(rows.size()), "scatter_add_rows: row count mismatch");
  const long nbase = bv.rows();
  for (int r : rows)
    require(r >= 0 && r < nbase, "scatter_add_rows: target row out of range");
  Tensor out(bv.shape, std::vector<double>(bv.data));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double* dst = &out.data[static_cast<long>(rows[i]) * f];
    const double* src = &dv.data[static_cast<long>(i) * f];
    for (long j = 0; j < f; ++j) dst[j] += src[j];
  }
  auto map = std::make_shared<std::vector<int>>(std::move(rows));
  return t.node(std::move(out), {base, delta}, [base, delta, f, map](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gb = tp.grad_mut(base);
    Tensor& gd = tp.grad_mut(delta);
    for (long i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i];
    for (std::size_t i = 0; i < map->size(); ++i) {
      const double* src = &go.data[static_cast<long>((*map)[i]) * f];
      double* dst = &gd.data[static_cast<long>(i) * f];
      for (long j = 0; j < f; ++j) dst[j] += src[j];
    }
  });
}

int rowgroup_max(Tape& t, int x, long group) {
  const Tensor& xv = t.val(x);
  require(group >= 1, "rowgroup_max: group must be positive");
  const long n = xv.rows(), f = xv.cols();
  require(n % group == 0, "rowgroup_max: rows not divisible by group");
  const long g = n / group;
  Tensor out({g, f});
  auto argmax = std::make_shared<std::vector<long>>(static_cast<std::size_t>(g * f));
  for (long r = 0; r < g; ++r) {
    for (long j = 0; j < f; ++j) {
      long best = r * group;
      double bv = xv.data[best * f + j];
      for (long m = 1; m < group; ++m) {
        const double v = xv.data[(r * group + m) * f + j];
        if (v > bv) {
          bv = v;
          best = r * group + m;
        }
      }
      out.data[r * f + j] = bv;
      (*argmax)[static_cast<std::size_t>(r * f + j)] = best;
    }
  }
  return t.node(std::move(out), {x}, [x, g, f, argmax](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < g * f; ++i)
      gx.data[(*argmax)[static_cast<std::size_t>(i)] * f + i % f] += go.data[i];
  });
}

int reduce_sum(Tape& t, int x) {
  const Tensor& xv = t.val(x);
  double s = 0.0;
  for (double v : xv.data) s += v;
  return t.node(Tensor::scalar(s), {x}, [x](Tape& tp, int o) {
    const double g = tp.grad(o).data[0];
    Tensor& gx = tp.grad_mut(x);
    for (double& v : gx.data) v += g;
  });
}

int reduce_mean(Tape& t, int x) {
  const Tensor& xv = t.val(x);
  require(xv.numel() > 0, "reduce_mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(xv.numel());
  double s = 0.0;
  for (double v : xv.data) s += v;
  return t.node(Tensor::scalar(s * inv), {x}, [x, inv](Tape& tp, int o) {
    const double g = tp.grad(o).data[0] * inv;
    Tensor& gx = tp.grad_mut(x);
    for (double& v : gx.data) v += g;
  });
}

int exp_elem(Tape& t, int x) {
  const Tensor& xv = t.val(x);
  Tensor out(xv.shape);
  for (long i = 0; i < xv.numel(); ++i) out.data[i] = std::exp(xv.data[i]);
  return t.node(std::move(out), {x}, [x](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    const Tensor& ov = tp.val(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * ov.data[i];
  });
}

int mul_scalar(Tape& t, int x, double s) {
  const Tensor& xv = t.val(x);
  Tensor out(xv.shape);
  for (long i = 0; i < xv.numel(); ++i) out.data[i] = xv.data[i] * s;
  return t.node(std::move(out), {x}, [x, s](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * s;
  });
}

}  // namespace js3c::ad::ops
