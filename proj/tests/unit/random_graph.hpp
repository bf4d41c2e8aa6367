#pragma once

// Random composite op graphs for gradient checking. A RandomGraph is a fixed
// program; evaluate() replays it on a fresh tape for any values of its inputs,
// so the finite-difference oracle can perturb inputs freely.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "finite_difference.hpp"
#include "surfer/tensor/ops.hpp"

namespace surfer::testing {

namespace ts = surfer::tensor;

struct GraphStep {
  std::string op;
  std::vector<std::size_t> leaves;  // indices into RandomGraph::inputs
  std::size_t a = 0, b = 0;         // op-specific integer arguments
  std::vector<std::size_t> list;    // op-specific index list
  double factor = 1.0;
};

struct RandomGraph {
  std::vector<Tensor> inputs;  // inputs[0] is the root value
  std::vector<GraphStep> steps;
  Tensor loss_weights;         // constant, shape of the final value
  int loss_kind = 0;           // 0 weighted sum, 1 mse, 2 mean_row_distance

  ts::Var build(ts::Tape& tape, const std::vector<Tensor>& values, std::vector<ts::Var>& leaves) const {
    leaves.clear();
    for (const Tensor& v : values) {
      Tensor t = v;
      t.set_requires_grad(true);
      leaves.push_back(tape.leaf(std::move(t)));
    }
    ts::Var x = leaves[0];
    for (const GraphStep& s : steps) {
      auto L = [&](std::size_t i) { return leaves[s.leaves[i]]; };
      if (s.op == "matmul") x = ts::matmul(x, L(0));
      else if (s.op == "add") x = ts::add(x, L(0));
      else if (s.op == "sub") x = ts::sub(L(0), x);
      else if (s.op == "mul") x = ts::mul(x, L(0));
      else if (s.op == "add_bias") x = ts::add_bias(x, L(0));
      else if (s.op == "gelu") x = ts::gelu(x);
      else if (s.op == "tanh") x = ts::tanh(x);
      else if (s.op == "scale") x = ts::scale(x, s.factor);
      else if (s.op == "layer_norm") x = ts::layer_norm(x, L(0), L(1));
      else if (s.op == "softmax") x = ts::softmax(x, static_cast<int>(s.a));
      else if (s.op == "segment_softmax") x = ts::segment_softmax(x, s.a);
      else if (s.op == "segment_matmul_tn") x = ts::segment_matmul_tn(x, L(0), s.a);
      else if (s.op == "attention") x = ts::attention(x, L(0), L(1), s.a, s.b);
      else if (s.op == "concat") {
        const ts::Var parts[] = {x, L(0)};
        x = ts::concat_rows(parts);
      } else if (s.op == "gather") x = ts::gather_rows(x, s.list);
      else if (s.op == "segment_mean") x = ts::segment_mean(x, s.list);
    }
    ts::Var w = tape.constant(loss_weights);
    if (loss_kind == 1) return ts::mse(x, w);
    if (loss_kind == 2) return ts::mean_row_distance(x, w);
    return ts::sum(ts::mul(x, w));
  }

  double evaluate(const std::vector<Tensor>& values) const {
    ts::Tape tape;
    std::vector<ts::Var> leaves;
    return build(tape, values, leaves).value().item();
  }
};

class GraphGenerator {
 public:
  explicit GraphGenerator(std::uint64_t seed) : state_(seed * 2862933555777941757ULL + 3037000493ULL) {}

  std::size_t pick(std::size_t n) {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<std::size_t>((state_ >> 33) % n);
  }

  Tensor tensor(std::size_t r, std::size_t c, double scale = 1.0) { return random_tensor(r, c, state_, scale); }

  std::vector<std::size_t> divisors(std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t d = 1; d <= n; ++d)
      if (n % d == 0) out.push_back(d);
    return out;
  }

  RandomGraph generate(std::size_t max_depth = 6) {
    static const char* kOps[] = {"matmul", "add", "sub", "mul", "add_bias", "gelu", "tanh", "scale",
                                 "layer_norm", "softmax", "segment_softmax", "segment_matmul_tn",
                                 "attention", "concat", "gather", "segment_mean"};
    RandomGraph g;
    std::size_t rows = 1 + pick(8), cols = 1 + pick(8);
    g.inputs.push_back(tensor(rows, cols));
    const std::size_t depth = 1 + pick(max_depth);
    auto leaf = [&](std::size_t r, std::size_t c, double scale = 1.0) {
      g.inputs.push_back(tensor(r, c, scale));
      return g.inputs.size() - 1;
    };
    while (g.steps.size() < depth) {
      GraphStep s;
      s.op = kOps[pick(std::size(kOps))];
      if (s.op == "matmul") {
        const std::size_t n = 1 + pick(8);
        s.leaves = {leaf(cols, n)};
        cols = n;
      } else if (s.op == "add" || s.op == "sub" || s.op == "mul") {
        s.leaves = {leaf(rows, cols)};
      } else if (s.op == "add_bias") {
        s.leaves = {leaf(1, cols)};
      } else if (s.op == "scale") {
        s.factor = 0.5 + static_cast<double>(pick(100)) / 50.0;
      } else if (s.op == "layer_norm") {
        if (cols < 2) continue;
        s.leaves = {leaf(1, cols), leaf(1, cols)};
      } else if (s.op == "softmax") {
        s.a = pick(2);
      } else if (s.op == "segment_softmax") {
        auto ds = divisors(rows);
        s.a = ds[pick(ds.size())];
      } else if (s.op == "segment_matmul_tn") {
        auto ds = divisors(rows);
        s.a = ds[pick(ds.size())];
        const std::size_t groups = rows / s.a;
        const std::size_t d = 1 + pick(8);
        if (groups * cols > 8) continue;
        s.leaves = {leaf(rows, d)};
        rows = groups * cols;
        cols = d;
      } else if (s.op == "attention") {
        std::vector<std::size_t> gs = {1};
        if (rows % 2 == 0) gs.push_back(2);
        s.a = gs[pick(gs.size())];
        auto hs = divisors(cols);
        s.b = hs[pick(hs.size())];
        const std::size_t nk = s.a * (1 + pick(4));
        s.leaves = {leaf(nk, cols), leaf(nk, cols)};
      } else if (s.op == "concat") {
        if (rows >= 8) continue;
        const std::size_t extra = 1 + pick(8 - rows);
        s.leaves = {leaf(extra, cols)};
        rows += extra;
      } else if (s.op == "gather") {
        const std::size_t n = 1 + pick(8);
        for (std::size_t i = 0; i < n; ++i) s.list.push_back(pick(rows));
        rows = n;
      } else if (s.op == "segment_mean") {
        std::size_t left = rows;
        while (left > 0) {
          const std::size_t len = 1 + pick(left);
          s.list.push_back(len);
          left -= len;
        }
        rows = s.list.size();
      }
      g.steps.push_back(std::move(s));
    }
    g.loss_kind = static_cast<int>(pick(3));
    g.loss_weights = tensor(rows, cols, 2.0);
    return g;
  }

 private:
  std::uint64_t state_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline GradCheckResult check_graph(const RandomGraph& g, double eps = 1e-5) {
  ts::Tape tape;
  std::vector<ts::Var> leaves;
  ts::Var loss = g.build(tape, g.inputs, leaves);
  ts::Gradients grads = tape.backward(loss);
  auto numeric = numeric_gradients([&](const std::vector<Tensor>& v) { return g.evaluate(v); }, g.inputs, eps);
  GradCheckResult r;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    r.max_rel_error = std::max(r.max_rel_error, max_relative_error(grads[leaves[i]], numeric[i]));
    r.checked += g.inputs[i].size();
  }
  return r;
}

}  // namespace surfer::testing
