#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surfer/taskgen/generator.hpp"
#include "surfer/train/rollout.hpp"

namespace surfer::train {

enum class Condition { Seen, UnseenBackground, ChangingLights, Distractors };
inline constexpr Condition kAllConditions[] = {Condition::Seen, Condition::UnseenBackground,
                                               Condition::ChangingLights, Condition::Distractors};

std::string_view condition_name(Condition c);
Condition parse_condition(std::string_view s);

struct EvalConfig {
  std::vector<int> levels{1, 2, 3, 4};
  std::size_t episodes = 95;  // per level
  std::size_t max_steps = 120;
  Condition condition = Condition::Seen;
  std::uint64_t seed = 0;
  std::vector<std::size_t> held_out_tables{8, 9};  // unseen-background tables
  double min_brightness = 0.5, max_brightness = 1.5;

  void validate() const;
};

nlohmann::ordered_json to_json(const EvalConfig& cfg);

// One level's instruction corpus and its train/test split.
struct LevelInstructions {
  int level = 1;
  std::vector<taskgen::Instruction> corpus;
  taskgen::SplitSpec split;
};

// Builds the split for a corpus of a single level.
LevelInstructions level_instructions(int level, std::vector<taskgen::Instruction> corpus);

// Test-split instructions. For levels 2-4 throws ConfigError if the split is
// empty, overlaps the training split or names an id outside the corpus.
std::vector<taskgen::Instruction> test_instructions(const LevelInstructions& li);

// The episode set of one level under the config: a test instruction and a
// freshly generated scene per episode. Depends only on the seed, the level,
// the condition's scene options and the instructions, never on the policy.
std::vector<EpisodeSpec> episode_set(const sim::World& world, const LevelInstructions& li, const EvalConfig& cfg);

// Closed-loop episodes of one level.
std::vector<EpisodeLog> eval_level(const sim::World& world, const PolicyFn& policy, const model::ModelConfig& model_cfg,
                                   const std::string& label, const LevelInstructions& li, const EvalConfig& cfg);

// Levels 2-4 under the configured condition. `reserved_tables` lists the
// tables held out when the training data was generated; unseen-background
// evaluation throws ConfigError unless its tables are among them.
std::vector<EpisodeLog> eval_robustness(const sim::World& world, const PolicyFn& policy,
                                        const model::ModelConfig& model_cfg, const std::string& label,
                                        const std::vector<LevelInstructions>& levels, const EvalConfig& cfg,
                                        const std::vector<std::size_t>& reserved_tables);

}  // namespace surfer::train
