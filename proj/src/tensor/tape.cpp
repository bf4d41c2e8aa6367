#include "surfer/tensor/tape.hpp"

#include "surfer/common/errors.hpp"

namespace surfer::tensor {

const Tensor& Var::value() const { return tape->value(id); }

bool Var::requires_grad() const { return tape->requires_grad(id); }

const Tensor& Gradients::operator[](Var leaf) const {
  if (!has(leaf)) throw Error("no gradient recorded for tape node " + std::to_string(leaf.id));
  return grads_[leaf.id];
}

bool Gradients::has(Var leaf) const { return leaf.id < present_.size() && present_[leaf.id]; }

Var Tape::leaf(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite value in leaf tensor");
  Node node;
  node.op = "leaf";
  node.requires_grad = value.requires_grad();
  node.is_leaf = true;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  value.set_requires_grad(false);
  return leaf(std::move(value));
}

Var Tape::record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite output from op '" + std::string(op) + "' " +
                       value.shape_string());
  }
  Node node;
  node.op = std::string(op);
  node.inputs.reserve(inputs.size());
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape != this) throw Error("op '" + std::string(op) + "' mixes tapes");
    node.inputs.push_back(v.id);
    needs = needs || nodes_[v.id].requires_grad;
  }
  node.requires_grad = needs && grad_enabled_;
  if (node.requires_grad) node.backward = std::move(backward);
  value.set_requires_grad(node.requires_grad);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw Error("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) throw ShapeError("backward requires a scalar loss, got " + lv.shape_string());

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> has(nodes_.size(), false);
  if (nodes_[loss.id].requires_grad) {
    grads[loss.id] = Tensor(1, 1, 1.0);
    has[loss.id] = true;
  }

  std::vector<Tensor*> grad_in;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!has[i] || node.is_leaf || !node.backward) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const std::size_t in = node.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      if (!has[in]) {
        grads[in] = Tensor(nodes_[in].value.rows(), nodes_[in].value.cols(), 0.0);
        has[in] = true;
      }
      grad_in[j] = &grads[in];
    }
    node.backward(grads[i], grad_in);
    grads[i] = Tensor();  // intermediate gradients are no longer needed
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.present_.assign(nodes_.size(), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.is_leaf || !node.requires_grad) continue;
    if (has[i]) {
      if (!grads[i].all_finite()) throw NumericError("non-finite gradient at leaf " + std::to_string(i));
      out.grads_[i] = std::move(grads[i]);
    } else {
      out.grads_[i] = Tensor(node.value.rows(), node.value.cols(), 0.0);
    }
    out.present_[i] = true;
  }
  return out;
}

}  // namespace surfer::tensor
