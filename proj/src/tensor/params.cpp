#include "surfer/tensor/params.hpp"

#include "surfer/common/errors.hpp"

namespace surfer::tensor {

void ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  entries_.emplace(std::move(name), std::move(value));
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + std::string(name));
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + std::string(name));
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store) {
  for (const auto& [name, value] : store.entries()) {
    Tensor copy = value;
    copy.set_requires_grad(true);
    vars_.emplace(name, tape.leaf(std::move(copy)));
  }
}

Var BoundParams::operator[](std::string_view name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("parameter not bound: " + std::string(name));
  return it->second;
}

GradMap BoundParams::gradients(const Gradients& grads) const {
  GradMap out;
  for (const auto& [name, var] : vars_) out.emplace(name, grads[var]);
  return out;
}

}  // namespace surfer::tensor
