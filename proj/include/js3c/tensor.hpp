#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "js3c/errors.hpp"
#include "js3c/rng.hpp"

namespace js3c::ad {

// Dense row-major tensor of doubles. Shape is plain metadata over a flat
// buffer; all math lives in the tape kernels. Double precision throughout,
// 32-bit floats appear only at file-format boundaries.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<long> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(static_cast<long>(data.size()) == numel_of(shape),
            "tensor data size does not match shape");
  }

  static long numel_of(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) {
      require(d >= 0, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  long numel() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  long dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Rows/cols view of the trailing dimension: {d0*...*dk-2, dk-1}.
  long rows() const {
    require(rank() >= 1, "rows() on rank-0 tensor");
    return numel() / shape.back();
  }
  long cols() const {
    require(rank() >= 1, "cols() on rank-0 tensor");
    return shape.back();
  }

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }

  static Tensor scalar(double v) {
    Tensor t(std::vector<long>{});
    t.data.assign(1, v);
    return t;
  }

  static Tensor full(std::vector<long> s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
  }

  static Tensor randn(std::vector<long> s, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(s));
    std::normal_distribution<double> d(0.0, stddev);
    for (double& x : t.data) x = d(rng);
    return t;
  }

  static Tensor uniform(std::vector<long> s, Rng& rng, double lo, double hi) {
    Tensor t(std::move(s));
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& x : t.data) x = d(rng);
    return t;
  }
};

}  // namespace js3c::ad
