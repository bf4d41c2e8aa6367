#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "surfer/tensor/tensor.hpp"

namespace surfer::tensor {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

// Accumulates the gradient contribution of one node into its inputs.
// grad_in[i] is null for inputs that do not require a gradient.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

class Gradients {
 public:
  // Gradient of the loss with respect to a requires-grad leaf.
  const Tensor& operator[](Var leaf) const;
  bool has(Var leaf) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<bool> present_;
};

// Reverse-mode tape. Nodes are appended in creation order; backward walks them
// in exactly the reverse order, so gradients are deterministic.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A leaf requires grad iff value.requires_grad() is set.
  Var leaf(Tensor value);
  Var constant(Tensor value);

  // Appends an op node. Throws NumericError if `value` has a non-finite entry.
  Var record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss for every requires-grad leaf. Leaves the loss
  // does not depend on receive exact zeros.
  Gradients backward(Var loss) const;

  bool grad_enabled() const { return grad_enabled_; }

 private:
  friend class NoGradGuard;

  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// While alive, ops on this tape produce constants (stop-gradient region).
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.grad_enabled_) {
    tape_.grad_enabled_ = false;
  }
  ~NoGradGuard() { tape_.grad_enabled_ = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace surfer::tensor
