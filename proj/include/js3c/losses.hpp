#pragma once

#include <cstdint>
#include <vector>

#include "js3c/tape.hpp"

namespace js3c {

// Loss bookkeeping for joint training. sigma is parametrized as
// s = log(sigma^2), so sigma = exp(s/2) stays positive with unconstrained s.
// The s parameters are trained at 10x the base learning rate.
struct LossState {
  std::vector<double> seg_class_weights;  // size C, indexed by class-1
  std::vector<double> ssc_class_weights;  // size C+1, indexed by label
  double s1_init = 0.0;                   // log sigma1^2
  double s2_init = 0.0;
};

namespace ad::loss {

// Mean over non-ignored rows of weights[targets[i]] * (-log softmax(row)
// [targets[i]]). targets hold 0-based column indices; -1 marks an ignored
// row. Every row ignored is a contract error.
int weighted_ce(Tape& t, int logits, const std::vector<int>& targets,
                const std::vector<double>& weights);

// Homoscedastic two-task weighting:
//   L = L_seg/(2 sigma1^2) + L_complet/(2 sigma2^2) + log sigma1 + log sigma2
// with sigma_i = exp(s_i / 2). All four inputs are scalar nodes.
int uncertainty_combine(Tape& t, int loss_seg, int loss_complet, int s1, int s2);

}  // namespace ad::loss

// Column index translation for the two supervision targets. Segmentation
// labels 1..C map to columns 0..C-1 with 0 ignored; completion labels 0..C
// map through with 255 ignored.
std::vector<int> seg_targets(const std::vector<std::int32_t>& labels, int num_classes);
std::vector<int> ssc_targets(const std::vector<std::uint8_t>& labels, int num_classes);

// Inverse-square-root frequency weights, normalized to mean 1 over classes
// seen at least once; unseen classes get weight 1.
std::vector<double> inv_sqrt_freq_weights(const std::vector<long>& counts);

}  // namespace js3c
