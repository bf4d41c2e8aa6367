#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

namespace surfer::model {

enum class Variant {
  Full,          // cross-attention action module plus action-conditioned scene module
  NoSp,          // scene module removed
  ConcatFusion,  // one self-attention stack over all modalities
  InstrSp,       // scene module conditioned on the instruction instead of the action
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);

enum class SceneLoss { MeanDistance, MeanSquared };

struct ModelConfig {
  std::size_t k = 3;                 // history length; windows hold k + 1 frames
  std::size_t layers = 4;            // action module decoder layers
  std::size_t scene_layers = 2;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t tokens_per_frame = 8;
  std::size_t patch = 8;             // patch side in pixels
  std::size_t grid = 7;              // patches per image side
  std::size_t ffn_mult = 2;          // feed-forward width as a multiple of d
  std::size_t vocab = 1024;          // hashed instruction token buckets
  std::size_t max_instruction_tokens = 32;
  std::size_t state_frequencies = 6; // sinusoidal octaves per state coordinate
  double lambda = 1.0;               // scene loss weight
  Variant variant = Variant::Full;
  SceneLoss scene_loss = SceneLoss::MeanDistance;
  bool teacher_forcing = false;      // scene module consumes the label action

  std::size_t window() const { return k + 1; }
  std::size_t patches() const { return grid * grid; }
  std::size_t patch_dim() const { return patch * patch * 3; }
  // Raw coordinate plus a sine and cosine per octave, for each of 7 coordinates.
  std::size_t state_features() const { return 7 * (1 + 2 * state_frequencies); }
  bool has_scene_module() const { return variant != Variant::NoSp; }
  // Feed-forward width of the fused stack, widened to match the parameter
  // count of the cross-attention stack it replaces.
  std::size_t fused_ffn() const { return ffn_mult * d + 2 * d; }

  // Throws ConfigError naming the violated constraint.
  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);

}  // namespace surfer::model
