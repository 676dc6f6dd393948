#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "js3c/tape.hpp"

// Central-difference gradient verification, kept independent of the adjoint
// code it checks: the numeric side only ever calls the forward pass.
namespace gradcheck {

struct Result {
  double max_rel_err = 0.0;
  long checked = 0;
  std::string worst;
};

// builder: given a tape and the current leaf values, rebuild the graph and
// return the scalar loss node. Called once per perturbed evaluation.
// Builders must insert the leaves first, one t.leaf() per statement, in the
// order given (the checker addresses leaf i as tape node i; leaf calls
// buried in one expression are reordered by the compiler).
using Builder = std::function<int(js3c::ad::Tape&, const std::vector<js3c::ad::Tensor>&)>;

inline double eval_loss(const Builder& build, const std::vector<js3c::ad::Tensor>& leaves) {
  js3c::ad::Tape tape;
  const int loss = build(tape, leaves);
  return tape.val(loss).data[0];
}

// Checks d(loss)/d(leaf) for every element of every leaf against central
// differences with relative step h. Relative error uses max(1, |numeric|)
// in the denominator.
inline Result check(const Builder& build, std::vector<js3c::ad::Tensor> leaves,
                    double h = 1e-4) {
  Result res;

  js3c::ad::Tape tape;
  const int loss = build(tape, leaves);
  tape.backward(loss);
  // Leaves are inserted first, in order, by every builder.
  std::vector<js3c::ad::Tensor> analytic;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    analytic.push_back(tape.grad(static_cast<int>(i)));

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (long e = 0; e < leaves[li].numel(); ++e) {
      const double x0 = leaves[li].data[e];
      const double step = h * std::max(1.0, std::abs(x0));
      leaves[li].data[e] = x0 + step;
      const double fp = eval_loss(build, leaves);
      leaves[li].data[e] = x0 - step;
      const double fm = eval_loss(build, leaves);
      leaves[li].data[e] = x0;
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel = std::abs(analytic[li].data[e] - numeric) /
                         std::max(1.0, std::abs(numeric));
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "leaf " + std::to_string(li) + " elem " + std::to_string(e) +
                    " analytic " + std::to_string(analytic[li].data[e]) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace gradcheck
