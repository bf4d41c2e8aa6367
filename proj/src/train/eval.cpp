#include "surfer/train/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "surfer/common/errors.hpp"
#include "surfer/common/rng.hpp"

namespace surfer::train {

using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kEpisodeStream = 0xE7A1;
constexpr std::uint64_t kSceneStream = 0x5CE7;
constexpr int kSceneRetries = 8;

}  // namespace

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::Seen: return "seen";
    case Condition::UnseenBackground: return "unseen-background";
    case Condition::ChangingLights: return "changing-lights";
    case Condition::Distractors: return "distractors";
  }
  return "seen";
}

Condition parse_condition(std::string_view s) {
  for (Condition c : kAllConditions)
    if (condition_name(c) == s) return c;
  throw ConfigError("unknown evaluation condition '" + std::string(s) +
                    "' (expected seen, unseen-background, changing-lights or distractors)");
}

void EvalConfig::validate() const {
  if (levels.empty()) throw ConfigError("evaluation needs at least one level");
  for (int l : levels)
    if (l < 1 || l > 4) throw ConfigError("evaluation level must be in 1..4, got " + std::to_string(l));
  if (episodes == 0) throw ConfigError("episodes per level must be at least 1");
  if (max_steps == 0) throw ConfigError("max episode steps must be at least 1");
  if (!(min_brightness >= 0.25 && max_brightness <= 2.0 && min_brightness <= max_brightness)) {
    throw ConfigError("brightness range must lie within [0.25, 2.0]");
  }
}

ordered_json to_json(const EvalConfig& c) {
  return {{"levels", c.levels},
          {"episodes", c.episodes},
          {"max_steps", c.max_steps},
          {"condition", condition_name(c.condition)},
          {"seed", c.seed},
          {"held_out_tables", c.held_out_tables},
          {"min_brightness", c.min_brightness},
          {"max_brightness", c.max_brightness}};
}

LevelInstructions level_instructions(int level, std::vector<taskgen::Instruction> corpus) {
  LevelInstructions li;
  li.level = level;
  std::erase_if(corpus, [&](const taskgen::Instruction& i) { return i.level != level; });
  li.split = taskgen::build_splits(corpus, level);
  li.corpus = std::move(corpus);
  return li;
}

std::vector<taskgen::Instruction> test_instructions(const LevelInstructions& li) {
  if (li.split.level != li.level) throw ConfigError("split level does not match the instruction level");
  if (li.split.test.empty()) throw ConfigError("level " + std::to_string(li.level) + " has an empty test split");
  if (li.level >= 2) {
    const std::unordered_set<std::string> train(li.split.train.begin(), li.split.train.end());
    for (const auto& id : li.split.test) {
      if (train.count(id)) throw ConfigError("test instruction " + id + " is also in the training split");
    }
  }
  auto out = taskgen::select_ids(li.corpus, li.split.test);
  if (out.size() != li.split.test.size()) throw ConfigError("test split names instructions outside the corpus");
  for (const auto& ins : out) {
    if (ins.level != li.level) throw ConfigError("test instruction " + ins.id + " has the wrong level");
  }
  return out;
}

std::vector<EpisodeSpec> episode_set(const sim::World& world, const LevelInstructions& li, const EvalConfig& cfg) {
  cfg.validate();
  const auto pool = test_instructions(li);
  taskgen::SceneOptions opts;
  if (cfg.condition == Condition::UnseenBackground) {
    if (cfg.held_out_tables.empty()) throw ConfigError("unseen-background evaluation needs held-out tables");
    opts.tables = cfg.held_out_tables;
  } else {
    for (std::size_t t = 0; t < world.tables.size(); ++t)
      if (std::find(cfg.held_out_tables.begin(), cfg.held_out_tables.end(), t) == cfg.held_out_tables.end())
        opts.tables.push_back(t);
  }
  if (cfg.condition == Condition::Distractors) opts.distractors = taskgen::DistractorMode::Many;

  const auto level = static_cast<std::uint64_t>(li.level);
  std::vector<EpisodeSpec> out;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    Rng rng(Rng::derive(cfg.seed, {kEpisodeStream, level, e}));
    EpisodeSpec spec;
    spec.instruction = pool[rng.index(pool.size())];
    const double lights = rng.uniform(cfg.min_brightness, cfg.max_brightness);
    spec.brightness = cfg.condition == Condition::ChangingLights ? lights : 1.0;
    bool placed = false;
    std::string last_error;
    for (int retry = 0; retry < kSceneRetries && !placed; ++retry) {
      try {
        spec.task = taskgen::generate_scene_for(world, spec.instruction,
                                                Rng::derive(cfg.seed, {kSceneStream, level, e,
                                                                       static_cast<std::uint64_t>(retry)}),
                                                opts);
        placed = true;
      } catch (const GenerationError& err) {
        last_error = err.what();
      }
    }
    if (!placed) throw GenerationError("no scene for evaluation instruction " + spec.instruction.id + ": " + last_error);
    char id[64];
    std::snprintf(id, sizeof id, "L%d-%s-%04zu", li.level, std::string(condition_name(cfg.condition)).c_str(), e);
    spec.id = id;
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<EpisodeLog> eval_level(const sim::World& world, const PolicyFn& policy, const model::ModelConfig& model_cfg,
                                   const std::string& label, const LevelInstructions& li, const EvalConfig& cfg) {
  const auto episodes = episode_set(world, li, cfg);
  RolloutConfig rc;
  rc.model = model_cfg;
  rc.max_steps = cfg.max_steps;
  rc.label = label;
  rc.condition = std::string(condition_name(cfg.condition));
  return rollout(world, episodes, policy, rc);
}

std::vector<EpisodeLog> eval_robustness(const sim::World& world, const PolicyFn& policy,
                                        const model::ModelConfig& model_cfg, const std::string& label,
                                        const std::vector<LevelInstructions>& levels, const EvalConfig& cfg,
                                        const std::vector<std::size_t>& reserved_tables) {
  if (cfg.condition == Condition::UnseenBackground) {
    if (cfg.held_out_tables.empty()) throw ConfigError("unseen-background evaluation needs held-out tables");
    for (std::size_t t : cfg.held_out_tables) {
      if (std::find(reserved_tables.begin(), reserved_tables.end(), t) == reserved_tables.end()) {
        throw ConfigError("table " + std::to_string(t) +
                          " was not held out when the training data was generated; unseen-background evaluation "
                          "needs tables reserved at data-generation time");
      }
    }
  }
  std::vector<EpisodeLog> out;
  for (int level : {2, 3, 4}) {
    const auto it = std::find_if(levels.begin(), levels.end(), [&](const LevelInstructions& li) { return li.level == level; });
    if (it == levels.end()) throw ConfigError("robustness evaluation needs level " + std::to_string(level) + " instructions");
    auto logs = eval_level(world, policy, model_cfg, label, *it, cfg);
    out.insert(out.end(), std::make_move_iterator(logs.begin()), std::make_move_iterator(logs.end()));
  }
  return out;
}

}  // namespace surfer::train
