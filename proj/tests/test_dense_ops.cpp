#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "js3c/dense_ops.hpp"
#include "js3c/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using js3c::ad::Tape;
using js3c::ad::Tensor;
namespace dense = js3c::ad::dense;
namespace ops = js3c::ad::ops;

TEST_CASE("conv3d matches the naive oracle at stride 1, same padding") {
  js3c::Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = trial % 2 == 0 ? 3 : 5;
    const long nz = 4, ny = 5, nx = 3, cin = 2, cout = 3;
    Tape t;
    const int x = t.leaf(Tensor::randn({nz, ny, nx, cin}, rng));
    const int w = t.leaf(Tensor::randn({static_cast<long>(k * k * k), cin, cout}, rng));
    const int b = t.leaf(Tensor::randn({cout}, rng));
    const int y = dense::conv3d(t, x, w, b, 1, (k - 1) / 2);
    REQUIRE(t.val(y).shape == std::vector<long>{nz, ny, nx, cout});
    auto want = oracles::dense_conv3d(t.val(x).data, nz, ny, nx, cin,
                                      t.val(w).data, k, cout, t.val(b).data);
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(std::abs(t.val(y).data[i] - want[i]) <=
            1e-9 * std::max(1.0, std::abs(want[i])));
  }
}

TEST_CASE("conv3d identity kernel reproduces the input") {
  js3c::Rng rng(32);
  Tape t;
  const long c = 3;
  const int x = t.leaf(Tensor::randn({3, 3, 3, c}, rng));
  Tensor w({27, c, c});
  for (long j = 0; j < c; ++j) w.data[(13 * c + j) * c + j] = 1.0;
  const int y = dense::conv3d(t, x, t.leaf(w), -1, 1, 1);
  CHECK(t.val(y).data == t.val(x).data);
}

TEST_CASE("conv3d stride two shrinks dims and matches subsampled oracle") {
  js3c::Rng rng(33);
  const long n = 6, cin = 2, cout = 2;
  Tape t;
  const int x = t.leaf(Tensor::randn({n, n, n, cin}, rng));
  const int w = t.leaf(Tensor::randn({27, cin, cout}, rng));
  const int y = dense::conv3d(t, x, w, -1, 2, 1);
  REQUIRE(t.val(y).shape == std::vector<long>{3, 3, 3, cout});
  // Stride-2 output(o) = stride-1 output(2o) when padding matches.
  Tape t1;
  const int y1 = dense::conv3d(t1, t1.leaf(t.val(x)), t1.leaf(t.val(w)), -1, 1, 1);
  for (long z = 0; z < 3; ++z)
    for (long yy = 0; yy < 3; ++yy)
      for (long xx = 0; xx < 3; ++xx)
        for (long ch = 0; ch < cout; ++ch) {
          const double got = t.val(y).data[((z * 3 + yy) * 3 + xx) * cout + ch];
          const double want =
              t1.val(y1).data[((2 * z * n + 2 * yy) * n + 2 * xx) * cout + ch];
          CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("conv3d gradients match central differences") {
  js3c::Rng rng(34);
  std::vector<Tensor> leaves;
  leaves.push_back(Tensor::randn({3, 4, 3, 2}, rng));
  leaves.push_back(Tensor::randn({27, 2, 2}, rng));
  leaves.push_back(Tensor::randn({2}, rng));
  auto build = [](Tape& t, const std::vector<Tensor>& lv) {
    const int x = t.leaf(lv[0]);
    const int w = t.leaf(lv[1]);
    const int b = t.leaf(lv[2]);
    int y = dense::conv3d(t, x, w, b, 1, 1);
    y = ops::leaky_relu(t, y, 0.01);
    return ops::reduce_mean(t, y);
  };
  auto res = gradcheck::check(build, leaves);
  INFO(res.worst);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("conv3d stride-2 gradients match central differences") {
  js3c::Rng rng(35);
  std::vector<Tensor> leaves;
  leaves.push_back(Tensor::randn({4, 4, 4, 2}, rng));
  leaves.push_back(Tensor::randn({27, 2, 3}, rng));
  auto build = [](Tape& t, const std::vector<Tensor>& lv) {
    const int x = t.leaf(lv[0]);
    const int w = t.leaf(lv[1]);
    const int y = dense::conv3d(t, x, w, -1, 2, 1);
    return ops::reduce_sum(t, y);
  };
  auto res = gradcheck::check(build, leaves);
  INFO(res.worst);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("max pool halves dims with ceil semantics and routes gradients") {
  js3c::Rng rng(36);
  Tape t;
  const int x = t.leaf(Tensor::randn({5, 4, 3, 2}, rng));
  const int y = dense::max_pool3d(t, x);
  REQUIRE(t.val(y).shape == std::vector<long>{3, 2, 2, 2});
  // Every output is the max over its (possibly partial) window.
  const auto& xv = t.val(x);
  for (long z = 0; z < 3; ++z)
    for (long yy = 0; yy < 2; ++yy)
      for (long xx = 0; xx < 2; ++xx)
        for (long ch = 0; ch < 2; ++ch) {
          double want = -1e300;
          for (long dz = 0; dz < 2; ++dz)
            for (long dy = 0; dy < 2; ++dy)
              for (long dx = 0; dx < 2; ++dx) {
                const long iz = 2 * z + dz, iy = 2 * yy + dy, ix = 2 * xx + dx;
                if (iz >= 5 || iy >= 4 || ix >= 3) continue;
                want = std::max(want, xv.data[((iz * 4 + iy) * 3 + ix) * 2 + ch]);
              }
          CHECK(t.val(y).data[((z * 2 + yy) * 2 + xx) * 2 + ch] == want);
        }
}

TEST_CASE("max pool gradients match central differences") {
  js3c::Rng rng(37);
  std::vector<Tensor> leaves{Tensor::randn({4, 4, 4, 2}, rng)};
  auto build = [](Tape& t, const std::vector<Tensor>& lv) {
    const int y = dense::max_pool3d(t, t.leaf(lv[0]));
    const int e = ops::exp_elem(t, y);
    return ops::reduce_mean(t, e);
  };
  auto res = gradcheck::check(build, leaves);
  INFO(res.worst);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("voxel shuffle rearranges channels to space bijectively") {
  js3c::Rng rng(38);
  const long r = 2, c = 3;
  Tape t;
  const int x = t.leaf(Tensor::randn({2, 3, 2, c * r * r * r}, rng));
  const int y = dense::voxel_shuffle(t, x, r);
  REQUIRE(t.val(y).shape == std::vector<long>{4, 6, 4, c});
  // Spot-check the index law.
  const auto& xv = t.val(x);
  const auto& yv = t.val(y);
  for (long z = 0; z < 4; ++z)
    for (long yy = 0; yy < 6; ++yy)
      for (long xx = 0; xx < 4; ++xx)
        for (long ch = 0; ch < c; ++ch) {
          const long off = (xx % r) + r * ((yy % r) + r * (z % r));
          const long src = (((z / r) * 3 + yy / r) * 2 + xx / r) * (c * 8) +
                           ch * 8 + off;
          CHECK(yv.data[((z * 6 + yy) * 4 + xx) * c + ch] == xv.data[src]);
        }
}

TEST_CASE("voxel shuffle then unshuffle is the identity, bitwise") {
  js3c::Rng rng(39);
  Tape t;
  const int x = t.leaf(Tensor::randn({3, 2, 4, 16}, rng));
  const int y = dense::voxel_shuffle(t, x, 2);
  const int z = dense::voxel_unshuffle(t, y, 2);
  CHECK(t.val(z).shape == t.val(x).shape);
  CHECK(t.val(z).data == t.val(x).data);
}

TEST_CASE("voxel shuffle gradients match central differences") {
  js3c::Rng rng(40);
  std::vector<Tensor> leaves{Tensor::randn({2, 2, 2, 16}, rng)};
  auto build = [](Tape& t, const std::vector<Tensor>& lv) {
    const int y = dense::voxel_shuffle(t, t.leaf(lv[0]), 2);
    const int e = ops::exp_elem(t, y);
    return ops::reduce_mean(t, e);
  };
  auto res = gradcheck::check(build, leaves);
  INFO(res.worst);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("softmax rows sum to one") {
  js3c::Rng rng(41);
  Tape t;
  const int x = t.leaf(Tensor::randn({7, 5}, rng, 3.0));
  const int s = ops::softmax_rows(t, x);
  for (long r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (long j = 0; j < 5; ++j) sum += t.val(s).data[r * 5 + j];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("channel count must divide by the shuffle factor cube") {
  Tape t;
  const int x = t.leaf(Tensor::zeros({2, 2, 2, 12}));
  CHECK_THROWS_AS(dense::voxel_shuffle(t, x, 2), js3c::contract_error);
}
