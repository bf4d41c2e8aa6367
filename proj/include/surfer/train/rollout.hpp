#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/model/surfer.hpp"
#include "surfer/sim/library.hpp"
#include "surfer/taskgen/instruction.hpp"

namespace surfer::train {

// One closed-loop episode to run.
struct EpisodeSpec {
  std::string id;
  taskgen::Instruction instruction;
  sim::TaskSpec task;
  double brightness = 1.0;
};

// Everything needed to replay an episode and score it again.
struct EpisodeLog {
  std::string id;
  std::string label;      // policy or variant name
  std::string condition;  // evaluation condition
  int level = 1;
  std::string skill;
  std::string instruction_id;
  std::string instruction;
  std::string scene_hash;  // hash of the initial scene
  std::size_t objects = 0;
  double brightness = 1.0;
  sim::TaskSpec task;
  std::vector<sim::Action> actions;  // clamped, as applied
  std::size_t steps = 0;
  bool success = false;
};

nlohmann::ordered_json episode_to_json(const sim::World& world, const EpisodeLog& log);
EpisodeLog episode_from_json(const sim::World& world, const nlohmann::ordered_json& j);
std::string episodes_to_jsonl(const sim::World& world, const std::vector<EpisodeLog>& logs);
std::vector<EpisodeLog> episodes_from_jsonl(const sim::World& world, const std::string& contents);

// Chooses the next raw action for each active episode. `episodes` holds the
// indices (into the rollout's spec list) of the inputs, and `step` the step
// number shared by all of them.
using PolicyFn = std::function<std::vector<sim::Action>(std::span<const model::ModelInput> inputs,
                                                        std::span<const std::size_t> episodes, std::size_t step)>;

// Batched forward pass of a trained or randomly initialised network.
PolicyFn model_policy(const tensor::ParamStore& params, const model::ModelConfig& cfg);
// Uniform actions over the legal box, seeded per (episode, step).
PolicyFn uniform_policy(std::uint64_t seed);
// Plays back stored action sequences (zero actions past their end).
PolicyFn replay_policy(std::vector<std::vector<sim::Action>> actions);

struct RolloutConfig {
  model::ModelConfig model;    // window length and instruction tokenisation
  std::size_t max_steps = 120;
  std::string label = "policy";
  std::string condition = "seen";
};

// Runs all episodes in lockstep: render the top view, extend each window
// (front-padded with the first frame), query the policy once for every
// active episode, clamp, step, and stop an episode as soon as its success
// condition holds or max_steps is reached.
std::vector<EpisodeLog> rollout(const sim::World& world, const std::vector<EpisodeSpec>& episodes,
                                const PolicyFn& policy, const RolloutConfig& cfg);

// Replays the logged actions from the logged initial scene. Returns an empty
// string when the step count and success flag are reproduced.
std::string verify_episode(const sim::World& world, const EpisodeLog& log);

}  // namespace surfer::train
