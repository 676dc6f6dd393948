#pragma once

#include <functional>
#include <vector>

#include "js3c/tensor.hpp"

namespace js3c::ad {

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order by construction; backward() walks it once in reverse.
// Handles are plain ints into the tape. One tape per training step.
class Tape {
 public:
  // A backward function reads grad(out) and accumulates into grad(input_i).
  using BackwardFn = std::function<void(Tape&, int out)>;

  int leaf(Tensor value) { return node(std::move(value), {}, nullptr); }

  int node(Tensor value, std::vector<int> inputs, BackwardFn back) {
    for (int i : inputs)
      require(i >= 0 && i < size(), "tape node references unknown input");
    values_.push_back(std::move(value));
    nodes_.push_back(Node{std::move(inputs), std::move(back)});
    return size() - 1;
  }

  int size() const { return static_cast<int>(values_.size()); }

  const Tensor& val(int id) const { return values_.at(static_cast<std::size_t>(id)); }

  // Valid after backward(); nodes outside the loss ancestry hold zeros.
  const Tensor& grad(int id) const {
    require(backward_done_, "grad() before backward()");
    return grads_.at(static_cast<std::size_t>(id));
  }

  Tensor& grad_mut(int id) { return grads_.at(static_cast<std::size_t>(id)); }

  const std::vector<int>& inputs_of(int id) const {
    return nodes_.at(static_cast<std::size_t>(id)).inputs;
  }

  // Seeds d(loss)/d(loss) = 1 and runs every reachable backward function
  // exactly once, in reverse insertion order. loss must be a scalar node.
  void backward(int loss) {
    require(!backward_done_, "backward() called twice on one tape");
    require(loss >= 0 && loss < size(), "backward() on unknown node");
    require(values_[static_cast<std::size_t>(loss)].numel() == 1,
            "backward() target is not a scalar");

    std::vector<char> needed(values_.size(), 0);
    needed[static_cast<std::size_t>(loss)] = 1;
    for (int i = loss; i >= 0; --i) {
      if (!needed[static_cast<std::size_t>(i)]) continue;
      for (int in : nodes_[static_cast<std::size_t>(i)].inputs)
        needed[static_cast<std::size_t>(in)] = 1;
    }

    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor& v : values_) grads_.push_back(Tensor::zeros(v.shape));
    grads_[static_cast<std::size_t>(loss)].data[0] = 1.0;
    backward_done_ = true;

    for (int i = loss; i >= 0; --i) {
      if (!needed[static_cast<std::size_t>(i)]) continue;
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back) n.back(*this, i);
    }
  }

 private:
  struct Node {
    std::vector<int> inputs;
    BackwardFn back;
  };

  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace js3c::ad
