#include "surfer/tensor/adam.hpp"

#include <cmath>

#include "surfer/common/errors.hpp"

namespace surfer::tensor {

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    const Tensor& p = params.at(name);
    if (!p.same_shape(g)) {
      throw ShapeError("adam: gradient " + g.shape_string() + " does not match parameter '" + name +
                       "' " + p.shape_string());
    }
    if (!g.all_finite()) throw NumericError("adam: non-finite gradient for parameter '" + name + "'");
  }

  state.step += 1;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto m_it = state.first_moment.try_emplace(name, p.rows(), p.cols(), 0.0).first;
    auto v_it = state.second_moment.try_emplace(name, p.rows(), p.cols(), 0.0).first;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace surfer::tensor
