#include "surfer/model/inputs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/taskgen/instruction.hpp"

namespace surfer::model {

using tensor::Tensor;

std::vector<std::size_t> instruction_token_ids(std::string_view text, const ModelConfig& cfg, bool* truncated) {
  const auto words = taskgen::tokenize(text);
  if (words.empty()) throw ConfigError("instruction has no tokens");
  std::vector<std::size_t> ids;
  for (const auto& w : words) {
    if (ids.size() == cfg.max_instruction_tokens) break;
    ids.push_back(static_cast<std::size_t>(fnv1a64(w) % cfg.vocab));
  }
  if (truncated) *truncated = words.size() > cfg.max_instruction_tokens;
  return ids;
}

std::array<double, 7> normalize_state(const sim::RobotState& r) {
  const double values[7] = {r.x, r.y, r.z, r.roll, r.pitch, r.yaw, r.gripper};
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("robot state has a non-finite entry");
  }
  constexpr double inv_pi = 1.0 / std::numbers::pi;
  return {r.x / 32.0, (r.y - 36.0) / 32.0, (r.z - 25.0) / 25.0, r.roll * inv_pi, r.pitch * inv_pi, r.yaw * inv_pi,
          2.0 * r.gripper - 1.0};
}

Tensor patchify(const sim::Image& image, const ModelConfig& cfg) {
  constexpr std::size_t S = sim::Image::kSize, C = sim::Image::kChannels;
  if (image.pixels.size() != S * S * C) {
    throw ShapeError("image has " + std::to_string(image.pixels.size()) + " values, expected 56x56x3");
  }
  const std::size_t p = cfg.patch, g = cfg.grid;
  Tensor out(g * g, p * p * C);
  for (std::size_t pr = 0; pr < g; ++pr) {
    for (std::size_t pc = 0; pc < g; ++pc) {
      double* row = out.ptr() + (pr * g + pc) * p * p * C;
      for (std::size_t y = 0; y < p; ++y) {
        const double* src = image.pixels.data() + ((pr * p + y) * S + pc * p) * C;
        std::copy(src, src + p * C, row + y * p * C);
      }
    }
  }
  return out;
}

std::vector<std::size_t> window_indices(std::size_t t, std::size_t k) {
  std::vector<std::size_t> out(k + 1);
  for (std::size_t j = 0; j <= k; ++j) out[j] = t + j >= k ? t + j - k : 0;
  return out;
}

tensor::Tensor state_features(const tensor::Tensor& states, const ModelConfig& cfg) {
  if (states.cols() != 7) throw ShapeError("states must have 7 columns, got " + states.shape_string());
  const std::size_t F = cfg.state_frequencies;
  tensor::Tensor out(states.rows(), cfg.state_features());
  for (std::size_t r = 0; r < states.rows(); ++r) {
    for (std::size_t c = 0; c < 7; ++c) {
      const double s = states(r, c);
      const std::size_t base = c * (1 + 2 * F);
      out(r, base) = s;
      double scale = std::numbers::pi;
      for (std::size_t i = 0; i < F; ++i, scale *= 2.0) {
        out(r, base + 1 + 2 * i) = std::sin(scale * s);
        out(r, base + 2 + 2 * i) = std::cos(scale * s);
      }
    }
  }
  return out;
}

ModelInput make_input(std::span<const sim::Image> frames, std::span<const sim::RobotState> states, std::size_t t,
                      std::size_t k, std::vector<std::size_t> tokens) {
  if (t >= frames.size() || t >= states.size()) throw ShapeError("window end lies past the episode");
  ModelInput in;
  for (std::size_t i : window_indices(t, k)) {
    in.images.push_back(frames[i]);
    in.states.push_back(states[i]);
  }
  in.tokens = std::move(tokens);
  in.padded = t < k;
  return in;
}

Batch make_batch(std::span<const ModelInput> inputs, const ModelConfig& cfg, std::span<const sim::Action> actions,
                 std::span<const sim::Image> next_frames) {
  const std::size_t B = inputs.size(), W = cfg.window(), P = cfg.patches(), D = cfg.patch_dim();
  if (B == 0) throw ShapeError("empty batch");
  if (!actions.empty() && actions.size() != B) throw ShapeError("label count differs from batch size");
  if (!next_frames.empty() && next_frames.size() != B) throw ShapeError("next-frame count differs from batch size");
  Batch b;
  b.size = B;
  b.patches = Tensor(B * W * P, D);
  b.states = Tensor(B * W, 7);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& in = inputs[i];
    if (in.images.size() != W || in.states.size() != W) {
      throw ShapeError("window holds " + std::to_string(in.images.size()) + " frames and " +
                       std::to_string(in.states.size()) + " states, expected " + std::to_string(W));
    }
    if (in.tokens.empty()) throw ConfigError("instruction has no tokens");
    for (std::size_t id : in.tokens) {
      if (id >= cfg.vocab) throw ShapeError("token id outside the vocabulary");
    }
    for (std::size_t f = 0; f < W; ++f) {
      const Tensor p = patchify(in.images[f], cfg);
      std::copy(p.ptr(), p.ptr() + p.size(), b.patches.ptr() + ((i * W + f) * P) * D);
      const auto s = normalize_state(in.states[f]);
      std::copy(s.begin(), s.end(), b.states.ptr() + (i * W + f) * 7);
    }
    b.tokens.push_back(in.tokens);
  }
  if (!actions.empty()) {
    b.actions = Tensor(B, 7);
    for (std::size_t i = 0; i < B; ++i) {
      const auto a = actions[i].to_array();
      std::copy(a.begin(), a.end(), b.actions.ptr() + i * 7);
    }
  }
  if (!next_frames.empty()) {
    b.next_patches = Tensor(B * P, D);
    for (std::size_t i = 0; i < B; ++i) {
      const Tensor p = patchify(next_frames[i], cfg);
      std::copy(p.ptr(), p.ptr() + p.size(), b.next_patches.ptr() + i * P * D);
    }
  }
  return b;
}

}  // namespace surfer::model
