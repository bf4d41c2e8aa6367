#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "surfer/model/config.hpp"
#include "surfer/sim/render.hpp"
#include "surfer/sim/types.hpp"
#include "surfer/tensor/tensor.hpp"

namespace surfer::model {

// Hashed bucket ids for the instruction's word tokens, truncated to the
// configured maximum. `truncated` (optional) reports whether truncation
// happened. Throws ConfigError for an instruction without tokens.
std::vector<std::size_t> instruction_token_ids(std::string_view text, const ModelConfig& cfg,
                                               bool* truncated = nullptr);

// Fixed affine rescaling of a robot state to roughly unit range.
std::array<double, 7> normalize_state(const sim::RobotState& r);

// [n x 7] normalized states -> [n x state_features()]: each coordinate s,
// then sin(2^i pi s) and cos(2^i pi s) for i < state_frequencies.
tensor::Tensor state_features(const tensor::Tensor& states, const ModelConfig& cfg);

// 49 rows of flattened 8x8x3 patches, row-major over the patch grid.
// Throws ShapeError for an image of the wrong size.
tensor::Tensor patchify(const sim::Image& image, const ModelConfig& cfg);

// Source indices of a k+1 window ending at t, front-padded with index 0.
std::vector<std::size_t> window_indices(std::size_t t, std::size_t k);

struct ModelInput {
  std::vector<sim::Image> images;        // oldest first, exactly k + 1
  std::vector<sim::RobotState> states;   // aligned with images
  std::vector<std::size_t> tokens;
  bool padded = false;
};

// Window over an episode prefix: frames[0..t], states[0..t].
ModelInput make_input(std::span<const sim::Image> frames, std::span<const sim::RobotState> states, std::size_t t,
                      std::size_t k, std::vector<std::size_t> tokens);

// Flattened mini-batch. Rows are grouped by sample, then frame.
struct Batch {
  std::size_t size = 0;
  tensor::Tensor patches;                      // [B*W*49 x 192]
  tensor::Tensor states;                       // [B*W x 7], normalized
  std::vector<std::vector<std::size_t>> tokens;
  tensor::Tensor actions;                      // [B x 7] labels, empty when absent
  tensor::Tensor next_patches;                 // [B*49 x 192] next frames, empty when absent
};

// Checks window lengths against the config and flattens the inputs.
// `actions` and `next_frames` may be empty; otherwise one per input.
Batch make_batch(std::span<const ModelInput> inputs, const ModelConfig& cfg,
                 std::span<const sim::Action> actions = {}, std::span<const sim::Image> next_frames = {});

}  // namespace surfer::model
