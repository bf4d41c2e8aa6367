#pragma once

#include <cstdint>

#include "surfer/tensor/params.hpp"

namespace surfer::tensor {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  GradMap first_moment;
  GradMap second_moment;
};

// One bias-corrected Adam update. Parameters without an entry in `grads` are
// left untouched. Throws NumericError naming the parameter on a non-finite
// gradient, before any parameter is modified.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state);

}  // namespace surfer::tensor
