#include "js3c/dense_ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

#include "js3c/errors.hpp"

namespace js3c::ad::dense {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

namespace {

struct ConvDims {
  long nz, ny, nx, cin;
  long oz, oy, ox, cout;
  int k;
  long stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, long stride, long pad) {
  require(x.rank() == 4, "conv3d: input must be {dz, dy, dx, C}");
  require(w.rank() == 3, "conv3d: weights must be {K^3, Cin, Cout}");
  require(stride >= 1, "conv3d: stride must be positive");
  require(pad >= 0, "conv3d: negative padding");
  const long k3 = w.dim(0);
  const int k = static_cast<int>(std::llround(std::cbrt(static_cast<double>(k3))));
  require(static_cast<long>(k) * k * k == k3, "conv3d: weight dim 0 is not a cube");
  require(w.dim(1) == x.dim(3), "conv3d: input channel mismatch");
  ConvDims d;
  d.nz = x.dim(0);
  d.ny = x.dim(1);
  d.nx = x.dim(2);
  d.cin = x.dim(3);
  d.cout = w.dim(2);
  d.k = k;
  d.stride = stride;
  d.pad = pad;
  d.oz = conv_out_dim(d.nz, k, stride, pad);
  d.oy = conv_out_dim(d.ny, k, stride, pad);
  d.ox = conv_out_dim(d.nx, k, stride, pad);
  require(d.oz >= 1 && d.oy >= 1 && d.ox >= 1, "conv3d: empty output volume");
  return d;
}

// Valid output-x run for one kernel x-offset: ix = ox*s - p + kx in [0, nx).
inline void x_run(long kx, const ConvDims& d, long& lo, long& hi) {
  // smallest ox with ox*s >= p - kx
  lo = d.pad - kx <= 0 ? 0 : (d.pad - kx + d.stride - 1) / d.stride;
  // largest ox with ox*s <= nx - 1 + p - kx; floor division also for
  // negative numerators (possible when kx exceeds nx - 1 + pad)
  const long num = d.nx - 1 + d.pad - kx;
  hi = num >= 0 ? num / d.stride : -((-num + d.stride - 1) / d.stride);
  hi = std::min(hi, d.ox - 1);
}

}  // namespace

int conv3d(Tape& t, int x, int w, int b, long stride, long pad) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  const ConvDims d = conv_dims(xv, wv, stride, pad);

  Tensor out({d.oz, d.oy, d.ox, d.cout});
  if (b >= 0) {
    const Tensor& bv = t.val(b);
    require(bv.numel() == d.cout, "conv3d: bias length mismatch");
    const long cells = d.oz * d.oy * d.ox;
    for (long i = 0; i < cells; ++i)
      std::copy_n(bv.data.data(), d.cout, &out.data[i * d.cout]);
  }

  for (int kz = 0; kz < d.k; ++kz)
    for (int ky = 0; ky < d.k; ++ky)
      for (int kx = 0; kx < d.k; ++kx) {
        const long o = kx + static_cast<long>(d.k) * (ky + static_cast<long>(d.k) * kz);
        ConstMatMap wo(&wv.data[o * d.cin * d.cout], d.cin, d.cout);
        long lo, hi;
        x_run(kx, d, lo, hi);
        if (lo > hi) continue;
        const long run = hi - lo + 1;
        for (long oz = 0; oz < d.oz; ++oz) {
          const long iz = oz * d.stride - d.pad + kz;
          if (iz < 0 || iz >= d.nz) continue;
          for (long oy = 0; oy < d.oy; ++oy) {
            const long iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.ny) continue;
            const long ix0 = lo * d.stride - d.pad + kx;
            ConstStridedMap in(&xv.data[((iz * d.ny + iy) * d.nx + ix0) * d.cin],
                               run, d.cin, Eigen::OuterStride<>(d.stride * d.cin));
            MatMap ot(&out.data[((oz * d.oy + oy) * d.ox + lo) * d.cout], run, d.cout);
            ot.noalias() += in * wo;
          }
        }
      }

  std::vector<int> ins{x, w};
  if (b >= 0) ins.push_back(b);
  return t.node(std::move(out), std::move(ins), [x, w, b, d](Tape& tp, int onode) {
    const Tensor& go = tp.grad(onode);
    const Tensor& xm = tp.val(x);
    const Tensor& wm = tp.val(w);
    Tensor& gx = tp.grad_mut(x);
    Tensor& gw = tp.grad_mut(w);
    for (int kz = 0; kz < d.k; ++kz)
      for (int ky = 0; ky < d.k; ++ky)
        for (int kx = 0; kx < d.k; ++kx) {
          const long o = kx + static_cast<long>(d.k) * (ky + static_cast<long>(d.k) * kz);
          ConstMatMap wo(&wm.data[o * d.cin * d.cout], d.cin, d.cout);
          MatMap gwo(&gw.data[o * d.cin * d.cout], d.cin, d.cout);
          long lo, hi;
          x_run(kx, d, lo, hi);
          if (lo > hi) continue;
          const long run = hi - lo + 1;
          for (long oz = 0; oz < d.oz; ++oz) {
            const long iz = oz * d.stride - d.pad + kz;
            if (iz < 0 || iz >= d.nz) continue;
            for (long oy = 0; oy < d.oy; ++oy) {
              const long iy = oy * d.stride - d.pad + ky;
              if (iy < 0 || iy >= d.ny) continue;
              const long ix0 = lo * d.stride - d.pad + kx;
              ConstMatMap gout(&go.data[((oz * d.oy + oy) * d.ox + lo) * d.cout],
                               run, d.cout);
              StridedMap gin(&gx.data[((iz * d.ny + iy) * d.nx + ix0) * d.cin],
                             run, d.cin, Eigen::OuterStride<>(d.stride * d.cin));
              gin.noalias() += gout * wo.transpose();
              ConstStridedMap in(&xm.data[((iz * d.ny + iy) * d.nx + ix0) * d.cin],
                                 run, d.cin, Eigen::OuterStride<>(d.stride * d.cin));
              gwo.noalias() += in.transpose() * gout;
            }
          }
        }
    if (b >= 0) {
      Tensor& gb = tp.grad_mut(b);
      const long cells = d.oz * d.oy * d.ox;
      for (long i = 0; i < cells; ++i)
        for (long c = 0; c < d.cout; ++c) gb.data[c] += go.data[i * d.cout + c];
    }
  });
}

int max_pool3d(Tape& t, int x) {
  const Tensor& xv = t.val(x);
  require(xv.rank() == 4, "max_pool3d: input must be {dz, dy, dx, C}");
  const long nz = xv.dim(0), ny = xv.dim(1), nx = xv.dim(2), c = xv.dim(3);
  const long oz = (nz + 1) / 2, oy = (ny + 1) / 2, ox = (nx + 1) / 2;
  Tensor out({oz, oy, ox, c});
  auto argmax = std::make_shared<std::vector<long>>(
      static_cast<std::size_t>(oz * oy * ox * c));
  for (long z = 0; z < oz; ++z)
    for (long y = 0; y < oy; ++y)
      for (long xx = 0; xx < ox; ++xx)
        for (long ch = 0; ch < c; ++ch) {
          long best = -1;
          double bv = 0.0;
          for (long dz = 0; dz < 2; ++dz)
            for (long dy = 0; dy < 2; ++dy)
              for (long dx = 0; dx < 2; ++dx) {
                const long iz = 2 * z + dz, iy = 2 * y + dy, ix = 2 * xx + dx;
                if (iz >= nz || iy >= ny || ix >= nx) continue;
                const long idx = ((iz * ny + iy) * nx + ix) * c + ch;
                if (best < 0 || xv.data[idx] > bv) {
                  best = idx;
                  bv = xv.data[idx];
                }
              }
          const long oidx = ((z * oy + y) * ox + xx) * c + ch;
          out.data[oidx] = bv;
          (*argmax)[static_cast<std::size_t>(oidx)] = best;
        }
  return t.node(std::move(out), {x}, [x, argmax](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    for (long i = 0; i < go.numel(); ++i)
      gx.data[(*argmax)[static_cast<std::size_t>(i)]] += go.data[i];
  });
}

namespace {

// Source element of out(z,y,x,ch) under the shuffle rearrangement.
inline long shuffle_src(long z, long y, long xx, long ch, long r, long ny_in,
                        long nx_in, long cin) {
  const long off = (xx % r) + r * ((y % r) + r * (z % r));
  const long src_c = ch * r * r * r + off;
  return (((z / r) * ny_in + y / r) * nx_in + xx / r) * cin + src_c;
}

}  // namespace

int voxel_shuffle(Tape& t, int x, long r) {
  const Tensor& xv = t.val(x);
  require(xv.rank() == 4, "voxel_shuffle: input must be {dz, dy, dx, C}");
  require(r >= 1, "voxel_shuffle: factor must be positive");
  const long r3 = r * r * r;
  const long cin = xv.dim(3);
  require(cin % r3 == 0, "voxel_shuffle: channels not divisible by r^3");
  const long nz = xv.dim(0), ny = xv.dim(1), nx = xv.dim(2);
  const long c = cin / r3;
  Tensor out({nz * r, ny * r, nx * r, c});
  long e = 0;
  for (long z = 0; z < nz * r; ++z)
    for (long y = 0; y < ny * r; ++y)
      for (long xx = 0; xx < nx * r; ++xx)
        for (long ch = 0; ch < c; ++ch, ++e)
          out.data[e] = xv.data[shuffle_src(z, y, xx, ch, r, ny, nx, cin)];
  return t.node(std::move(out), {x}, [x, r, ny, nx, cin](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    const long c = cin / (r * r * r);
    const long zr = tp.val(o).dim(0), yr = tp.val(o).dim(1), xr = tp.val(o).dim(2);
    long e = 0;
    for (long z = 0; z < zr; ++z)
      for (long y = 0; y < yr; ++y)
        for (long xx = 0; xx < xr; ++xx)
          for (long ch = 0; ch < c; ++ch, ++e)
            gx.data[shuffle_src(z, y, xx, ch, r, ny, nx, cin)] += go.data[e];
  });
}

int voxel_unshuffle(Tape& t, int x, long r) {
  const Tensor& xv = t.val(x);
  require(xv.rank() == 4, "voxel_unshuffle: input must be {dz, dy, dx, C}");
  require(r >= 1, "voxel_unshuffle: factor must be positive");
  const long nz = xv.dim(0), ny = xv.dim(1), nx = xv.dim(2), c = xv.dim(3);
  require(nz % r == 0 && ny % r == 0 && nx % r == 0,
          "voxel_unshuffle: dims not divisible by factor");
  const long oz = nz / r, oy = ny / r, ox = nx / r, cout = c * r * r * r;
  Tensor out({oz, oy, ox, cout});
  long e = 0;
  for (long z = 0; z < nz; ++z)
    for (long y = 0; y < ny; ++y)
      for (long xx = 0; xx < nx; ++xx)
        for (long ch = 0; ch < c; ++ch, ++e)
          out.data[shuffle_src(z, y, xx, ch, r, oy, ox, cout)] = xv.data[e];
  return t.node(std::move(out), {x}, [x, r, oy, ox, cout](Tape& tp, int o) {
    const Tensor& go = tp.grad(o);
    Tensor& gx = tp.grad_mut(x);
    const long c = cout / (r * r * r);
    const long nz = tp.val(x).dim(0);
    long e = 0;
    for (long z = 0; z < nz; ++z)
      for (long y = 0; y < oy * r; ++y)
        for (long xx = 0; xx < ox * r; ++xx)
          for (long ch = 0; ch < c; ++ch, ++e)
            gx.data[e] += go.data[shuffle_src(z, y, xx, ch, r, oy, ox, cout)];
  });
}

}  // namespace js3c::ad::dense
