#include "js3c/losses.hpp"

#include <cmath>
#include <memory>

#include "js3c/errors.hpp"

namespace js3c {

namespace ad::loss {

int weighted_ce(Tape& t, int logits, const std::vector<int>& targets,
                const std::vector<double>& weights) {
  const Tensor& lv = t.val(logits);
  require(lv.rank() == 2, "weighted_ce: logits must be {N, K}");
  const long n = lv.dim(0), k = lv.dim(1);
  require(static_cast<long>(targets.size()) == n, "weighted_ce: target count mismatch");
  require(static_cast<long>(weights.size()) == k, "weighted_ce: weight count mismatch");
  for (double w : weights) require(w > 0.0, "weighted_ce: weights must be positive");

  long kept = 0;
  for (int tg : targets) {
    if (tg < 0) continue;
    require(tg < k, "weighted_ce: target column out of range");
    ++kept;
  }
  require(kept > 0, "weighted_ce: every row is ignored");

  // Cache softmax rows for the adjoint; ignored rows stay zero.
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n * k), 0.0);
  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    const int tg = targets[static_cast<std::size_t>(i)];
    if (tg < 0) continue;
    const double* row = &lv.data[i * k];
    double mx = row[0];
    for (long j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (long j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double log_z = mx + std::log(sum);
    total += weights[static_cast<std::size_t>(tg)] * (log_z - row[tg]);
    double* pr = &(*probs)[static_cast<std::size_t>(i * k)];
    for (long j = 0; j < k; ++j) pr[j] = std::exp(row[j] - log_z);
  }
  const double inv_kept = 1.0 / static_cast<double>(kept);

  auto tgt = std::make_shared<std::vector<int>>(targets);
  auto wts = std::make_shared<std::vector<double>>(weights);
  return t.node(Tensor::scalar(total * inv_kept), {logits},
                [logits, n, k, probs, tgt, wts, inv_kept](Tape& tp, int o) {
                  const double g = tp.grad(o).data[0] * inv_kept;
                  Tensor& gl = tp.grad_mut(logits);
                  for (long i = 0; i < n; ++i) {
                    const int tg = (*tgt)[static_cast<std::size_t>(i)];
                    if (tg < 0) continue;
                    const double w = (*wts)[static_cast<std::size_t>(tg)] * g;
                    const double* pr = &(*probs)[static_cast<std::size_t>(i * k)];
                    double* dst = &gl.data[i * k];
                    for (long j = 0; j < k; ++j) dst[j] += w * pr[j];
                    dst[tg] -= w;
                  }
                });
}

int uncertainty_combine(Tape& t, int loss_seg, int loss_complet, int s1, int s2) {
  for (int id : {loss_seg, loss_complet, s1, s2})
    require(t.val(id).numel() == 1, "uncertainty_combine: inputs must be scalars");
  const double ls = t.val(loss_seg).data[0];
  const double lc = t.val(loss_complet).data[0];
  const double a = t.val(s1).data[0];
  const double b = t.val(s2).data[0];
  // 1/(2 sigma^2) = exp(-s)/2 and log sigma = s/2.
  const double total =
      0.5 * std::exp(-a) * ls + 0.5 * std::exp(-b) * lc + 0.5 * a + 0.5 * b;
  return t.node(Tensor::scalar(total), {loss_seg, loss_complet, s1, s2},
                [loss_seg, loss_complet, s1, s2](Tape& tp, int o) {
                  const double g = tp.grad(o).data[0];
                  const double ls = tp.val(loss_seg).data[0];
                  const double lc = tp.val(loss_complet).data[0];
                  const double ea = std::exp(-tp.val(s1).data[0]);
                  const double eb = std::exp(-tp.val(s2).data[0]);
                  tp.grad_mut(loss_seg).data[0] += g * 0.5 * ea;
                  tp.grad_mut(loss_complet).data[0] += g * 0.5 * eb;
                  tp.grad_mut(s1).data[0] += g * 0.5 * (1.0 - ea * ls);
                  tp.grad_mut(s2).data[0] += g * 0.5 * (1.0 - eb * lc);
                });
}

}  // namespace ad::loss

std::vector<int> seg_targets(const std::vector<std::int32_t>& labels, int num_classes) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t l = labels[i];
    require(l >= 0 && l <= num_classes, "seg targets: label out of range");
    out[i] = l == 0 ? -1 : l - 1;
  }
  return out;
}

std::vector<int> ssc_targets(const std::vector<std::uint8_t>& labels, int num_classes) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t l = labels[i];
    if (l == 255) {
      out[i] = -1;
      continue;
    }
    require(l <= num_classes, "ssc targets: label out of range");
    out[i] = l;
  }
  return out;
}

std::vector<double> inv_sqrt_freq_weights(const std::vector<long>& counts) {
  long total = 0;
  for (long c : counts) {
    require(c >= 0, "class weights: negative count");
    total += c;
  }
  std::vector<double> w(counts.size(), 1.0);
  if (total == 0) return w;
  double sum_seen = 0.0;
  long n_seen = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    w[i] = 1.0 / std::sqrt(static_cast<double>(counts[i]) / static_cast<double>(total));
    sum_seen += w[i];
    ++n_seen;
  }
  const double mean = sum_seen / static_cast<double>(n_seen);
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] != 0) w[i] /= mean;
  return w;
}

}  // namespace js3c
