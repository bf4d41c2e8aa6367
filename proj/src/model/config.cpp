#include "surfer/model/config.hpp"

#include "surfer/common/errors.hpp"

namespace surfer::model {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoSp: return "no-sp";
    case Variant::ConcatFusion: return "concat-fusion";
    case Variant::InstrSp: return "instr-sp";
  }
  return "full";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Full, Variant::NoSp, Variant::ConcatFusion, Variant::InstrSp}) {
    if (variant_name(v) == s) return v;
  }
  throw ConfigError("unknown model variant: " + std::string(s));
}

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("model dim must be a positive multiple of heads");
  if (grid * patch != 56) throw ConfigError("patch grid times patch size must equal the 56 pixel image size");
  if (layers == 0) throw ConfigError("action module needs at least one layer");
  if (has_scene_module() && scene_layers == 0) throw ConfigError("scene module needs at least one layer");
  if (tokens_per_frame == 0 || tokens_per_frame > patches()) throw ConfigError("tokens per frame must lie in [1, 49]");
  if (vocab == 0) throw ConfigError("vocab must be positive");
  if (max_instruction_tokens == 0) throw ConfigError("max instruction tokens must be positive");
  if (state_frequencies > 12) throw ConfigError("state frequencies must be at most 12");
  if (ffn_mult == 0) throw ConfigError("feed-forward multiple must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("scene loss weight must be non-negative");
  if (variant == Variant::NoSp && lambda != 0.0) throw ConfigError("no-sp variant requires lambda = 0");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  return {{"k", c.k},
          {"layers", c.layers},
          {"scene_layers", c.scene_layers},
          {"d", c.d},
          {"heads", c.heads},
          {"tokens_per_frame", c.tokens_per_frame},
          {"patch", c.patch},
          {"grid", c.grid},
          {"ffn_mult", c.ffn_mult},
          {"vocab", c.vocab},
          {"max_instruction_tokens", c.max_instruction_tokens},
          {"state_frequencies", c.state_frequencies},
          {"lambda", c.lambda},
          {"variant", variant_name(c.variant)},
          {"scene_loss", c.scene_loss == SceneLoss::MeanDistance ? "mean-distance" : "mean-squared"},
          {"teacher_forcing", c.teacher_forcing}};
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  try {
    c.k = j.at("k").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.scene_layers = j.at("scene_layers").get<std::size_t>();
    c.d = j.at("d").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.tokens_per_frame = j.at("tokens_per_frame").get<std::size_t>();
    c.patch = j.at("patch").get<std::size_t>();
    c.grid = j.at("grid").get<std::size_t>();
    c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.max_instruction_tokens = j.at("max_instruction_tokens").get<std::size_t>();
    c.state_frequencies = j.at("state_frequencies").get<std::size_t>();
    c.lambda = j.at("lambda").get<double>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    const auto loss = j.at("scene_loss").get<std::string>();
    if (loss != "mean-distance" && loss != "mean-squared") throw ConfigError("unknown scene loss: " + loss);
    c.scene_loss = loss == "mean-distance" ? SceneLoss::MeanDistance : SceneLoss::MeanSquared;
    c.teacher_forcing = j.at("teacher_forcing").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace surfer::model
