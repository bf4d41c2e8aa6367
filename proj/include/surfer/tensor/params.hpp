#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "surfer/tensor/tape.hpp"

namespace surfer::tensor {

using GradMap = std::map<std::string, Tensor, std::less<>>;

// Named learnable tensors, iterated in name order.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  const std::map<std::string, Tensor, std::less<>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.entries_ == b.entries_; }

 private:
  std::map<std::string, Tensor, std::less<>> entries_;
};

// Parameters placed on a tape as requires-grad leaves.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store);

  Var operator[](std::string_view name) const;
  bool contains(std::string_view name) const { return vars_.find(name) != vars_.end(); }

  // Gradient per parameter name; parameters untouched by the loss get zeros.
  GradMap gradients(const Gradients& grads) const;

 private:
  std::map<std::string, Var, std::less<>> vars_;
};

}  // namespace surfer::tensor
