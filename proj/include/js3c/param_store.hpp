#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "js3c/tensor.hpp"

namespace js3c {

// Training partition. Seg covers the segmentation network (W_seg); Aux
// covers everything else (completion decoder, interaction module, loss
// sigmas). The partition is total: every trainable tensor is exactly one.
enum class Partition : std::uint8_t { kSeg = 0, kAux = 1 };

struct Param {
  ad::Tensor value;
  Partition partition = Partition::kSeg;
  double lr_mult = 1.0;
  ad::Tensor m;  // Adam first moment
  ad::Tensor v;  // Adam second moment
  long step = 0;
};

// Named parameter container. Iteration order is the registration order, so
// every pass over the store is deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, ad::Tensor value, Partition partition,
             double lr_mult = 1.0);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  long total_elements() const;

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> order_;
  std::vector<Param> params_;
};

// Piecewise-constant decay: lr(epoch) = base * 0.7^floor(epoch / 5).
double lr_schedule(double base_lr, long epoch);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update per named gradient. Each parameter's
// effective rate is cfg.lr * lr_mult. Unnamed parameters are left untouched.
void adam_step(ParamStore& store,
               const std::map<std::string, ad::Tensor>& grads,
               const AdamConfig& cfg);

// Binary container with named tensors, shapes, partition flags and Adam
// moments; raw little-endian doubles. Layout documented in the README.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace js3c
