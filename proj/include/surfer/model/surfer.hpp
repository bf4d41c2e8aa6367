#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/model/config.hpp"
#include "surfer/model/inputs.hpp"
#include "surfer/tensor/params.hpp"

namespace surfer::model {

// Fresh parameters. Each tensor is drawn from its own stream derived from
// (seed, name), so a tensor's initial value does not depend on which other
// tensors the variant creates.
tensor::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Parameter names the config requires, in store order.
std::vector<std::string> param_names(const ModelConfig& cfg);

// Throws ConfigError when the store does not hold exactly the config's
// parameters with the expected shapes.
void check_params(const tensor::ParamStore& params, const ModelConfig& cfg);

// The network's forward graph on one tape. Parameters are bound as
// requires-grad leaves.
class SurferNet {
 public:
  SurferNet(const ModelConfig& cfg, tensor::Tape& tape, const tensor::ParamStore& params);

  const ModelConfig& config() const { return cfg_; }
  const tensor::BoundParams& params() const { return params_; }
  tensor::Tape& tape() const { return tape_; }

  // [N*49 x 192] patches -> [N*8 x d] tokens.
  tensor::Var encode_images(const tensor::Tensor& patches) const;
  // One pooled token per instruction -> [B x d].
  tensor::Var encode_instructions(const std::vector<std::vector<std::size_t>>& tokens) const;
  // [N x 7] normalized states -> [N x d].
  tensor::Var encode_states(const tensor::Tensor& states) const;
  // Raw (unclamped) next action per sample -> [B x 7].
  tensor::Var predict_action(tensor::Var image_tokens, tensor::Var instruction, tensor::Var state_tokens,
                             std::size_t batch) const;
  // Predicted next-frame tokens -> [B*8 x d]. `condition` is the [B x 7]
  // action, or the [B x d] instruction token for the instr-sp variant.
  tensor::Var predict_scene(tensor::Var image_tokens, tensor::Var condition, std::size_t batch) const;

  struct Loss {
    tensor::Var action;
    tensor::Var scene;   // constant zero when the scene branch is skipped
    tensor::Var total;
    bool scene_computed = false;
  };
  // Joint objective. The scene branch is skipped entirely when lambda is 0.
  // Target tokens are encoded from the batch's next frames under a
  // stop-gradient unless `scene_target` supplies them. Throws NumericError
  // naming the branch that produced a non-finite value.
  Loss loss(const Batch& batch, const tensor::Tensor* scene_target = nullptr) const;

  // Loss arithmetic on given predictions: MSE over actions plus lambda times
  // the scene distance. `predicted_scene` null means the scene term is skipped.
  Loss combine(tensor::Var predicted_action, tensor::Var label, const tensor::Var* predicted_scene,
               const tensor::Var* target) const;

 private:
  tensor::Var attend(const std::string& prefix, tensor::Var q_in, tensor::Var kv_in, std::size_t groups) const;
  tensor::Var decoder_layer(const std::string& prefix, tensor::Var x, const tensor::Var* kv, std::size_t groups) const;
  tensor::Var ln(const std::string& prefix, tensor::Var x) const;
  tensor::Var mlp(const std::string& prefix, tensor::Var x) const;

  ModelConfig cfg_;
  tensor::Tape& tape_;
  tensor::BoundParams params_;
};

struct LossValues {
  double action = 0.0;
  double scene = 0.0;
  double total = 0.0;
};

// Forward-only conveniences over a fresh tape.
tensor::Tensor encode_image(const tensor::ParamStore& params, const ModelConfig& cfg, const sim::Image& image);
tensor::Tensor encode_instruction(const tensor::ParamStore& params, const ModelConfig& cfg,
                                  const std::vector<std::size_t>& tokens);
tensor::Tensor encode_state(const tensor::ParamStore& params, const ModelConfig& cfg, const sim::RobotState& state);
// Raw action for one window; callers clamp before stepping the simulator.
sim::Action predict_action(const tensor::ParamStore& params, const ModelConfig& cfg, const ModelInput& input);
std::vector<sim::Action> predict_actions(const tensor::ParamStore& params, const ModelConfig& cfg,
                                         std::span<const ModelInput> inputs);
// Next-frame tokens from history tokens [(k+1)*8 x d] and an action.
tensor::Tensor predict_scene(const tensor::ParamStore& params, const ModelConfig& cfg,
                             const tensor::Tensor& history_tokens, const sim::Action& action);
LossValues loss_values(const tensor::ParamStore& params, const ModelConfig& cfg, const Batch& batch,
                       const tensor::Tensor* scene_target = nullptr);
// Stop-gradient target tokens for the batch's next frames -> [B*8 x d].
tensor::Tensor scene_targets(const tensor::ParamStore& params, const ModelConfig& cfg, const Batch& batch);

// Checkpoint plus a model card (`<path>.card.json`) holding the config and
// the caller's metadata.
void save_model(const std::filesystem::path& path, const tensor::ParamStore& params, const ModelConfig& cfg,
                const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());

struct LoadedModel {
  ModelConfig config;
  tensor::ParamStore params;
  nlohmann::ordered_json card;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace surfer::model
