#include "surfer/train/rollout.hpp"

#include <map>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/sim/render.hpp"
#include "surfer/sim/serialize.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::train {

using nlohmann::ordered_json;

ordered_json episode_to_json(const sim::World& world, const EpisodeLog& log) {
  ordered_json actions = ordered_json::array();
  for (const auto& a : log.actions) actions.push_back(sim::action_to_json(a));
  return {{"id", log.id},
          {"label", log.label},
          {"condition", log.condition},
          {"level", log.level},
          {"skill", log.skill},
          {"instruction_id", log.instruction_id},
          {"instruction", log.instruction},
          {"scene_hash", log.scene_hash},
          {"objects", log.objects},
          {"brightness", log.brightness},
          {"steps", log.steps},
          {"success", log.success},
          {"task", sim::task_to_json(world, log.task)},
          {"actions", actions}};
}

EpisodeLog episode_from_json(const sim::World& world, const ordered_json& j) {
  EpisodeLog log;
  try {
    log.id = j.at("id").get<std::string>();
    log.label = j.at("label").get<std::string>();
    log.condition = j.at("condition").get<std::string>();
    log.level = j.at("level").get<int>();
    log.skill = j.at("skill").get<std::string>();
    log.instruction_id = j.at("instruction_id").get<std::string>();
    log.instruction = j.at("instruction").get<std::string>();
    log.scene_hash = j.at("scene_hash").get<std::string>();
    log.objects = j.at("objects").get<std::size_t>();
    log.brightness = j.at("brightness").get<double>();
    log.steps = j.at("steps").get<std::size_t>();
    log.success = j.at("success").get<bool>();
    log.task = sim::task_from_json(world, j.at("task"));
    for (const auto& a : j.at("actions")) log.actions.push_back(sim::action_from_json(a));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("episode log: ") + e.what());
  }
  return log;
}

std::string episodes_to_jsonl(const sim::World& world, const std::vector<EpisodeLog>& logs) {
  std::string out;
  for (const auto& l : logs) out += episode_to_json(world, l).dump() + "\n";
  return out;
}

std::vector<EpisodeLog> episodes_from_jsonl(const sim::World& world, const std::string& contents) {
  std::vector<EpisodeLog> out;
  std::istringstream in(contents);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(episode_from_json(world, ordered_json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("episode log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

PolicyFn model_policy(const tensor::ParamStore& params, const model::ModelConfig& cfg) {
  model::check_params(params, cfg);
  return [&params, cfg](std::span<const model::ModelInput> inputs, std::span<const std::size_t>, std::size_t) {
    return model::predict_actions(params, cfg, inputs);
  };
}

PolicyFn uniform_policy(std::uint64_t seed) {
  return [seed](std::span<const model::ModelInput> inputs, std::span<const std::size_t> episodes, std::size_t step) {
    std::vector<sim::Action> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Rng rng(Rng::derive(seed, {episodes[i], step}));
      const double t = sim::kMaxTranslation, r = sim::kMaxRotation, g = sim::kMaxGripDelta;
      out.push_back({rng.uniform(-t, t), rng.uniform(-t, t), rng.uniform(-t, t), rng.uniform(-r, r),
                     rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-g, g)});
    }
    return out;
  };
}

PolicyFn replay_policy(std::vector<std::vector<sim::Action>> actions) {
  return [actions = std::move(actions)](std::span<const model::ModelInput> inputs,
                                        std::span<const std::size_t> episodes, std::size_t step) {
    std::vector<sim::Action> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& seq = actions.at(episodes[i]);
      out.push_back(step < seq.size() ? seq[step] : sim::Action{});
    }
    return out;
  };
}

namespace {

// Frames and states by step index; only the first and the last k + 1 are kept.
struct Running {
  std::map<std::size_t, sim::Image> frames;
  std::map<std::size_t, sim::RobotState> states;
  std::vector<std::size_t> tokens;
  sim::SceneState scene;
  bool done = false;
};

}  // namespace

std::vector<EpisodeLog> rollout(const sim::World& world, const std::vector<EpisodeSpec>& episodes,
                                const PolicyFn& policy, const RolloutConfig& cfg) {
  if (cfg.max_steps == 0) throw ConfigError("max episode steps must be at least 1");
  const std::size_t k = cfg.model.k;
  std::vector<EpisodeLog> logs(episodes.size());
  std::vector<Running> run(episodes.size());
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const EpisodeSpec& spec = episodes[e];
    sim::validate_task(world, spec.task);
    EpisodeLog& log = logs[e];
    log.id = spec.id;
    log.label = cfg.label;
    log.condition = cfg.condition;
    log.level = spec.instruction.level;
    log.skill = std::string(sim::skill_name(spec.task.skill));
    log.instruction_id = spec.instruction.id;
    log.instruction = spec.instruction.text;
    log.scene_hash = sim::scene_hash(world, spec.task.initial);
    log.objects = spec.task.initial.objects.size();
    log.brightness = spec.brightness;
    log.task = spec.task;
    run[e].scene = spec.task.initial;
    run[e].tokens = model::instruction_token_ids(spec.instruction.text, cfg.model);
  }

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    std::vector<model::ModelInput> inputs;
    std::vector<std::size_t> active;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      Running& r = run[e];
      if (r.done) continue;
      r.frames[step] = sim::render(world, r.scene, sim::View::Top, {episodes[e].brightness});
      r.states[step] = r.scene.robot;
      model::ModelInput in;
      for (std::size_t j : model::window_indices(step, k)) {
        in.images.push_back(r.frames.at(j));
        in.states.push_back(r.states.at(j));
      }
      in.padded = step < k;
      in.tokens = r.tokens;
      inputs.push_back(std::move(in));
      active.push_back(e);
    }
    if (active.empty()) break;
    const std::vector<sim::Action> raw = policy(inputs, active, step);
    if (raw.size() != active.size()) throw ConfigError("policy returned the wrong number of actions");
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t e = active[i];
      Running& r = run[e];
      const sim::Action a = sim::clamp_action(raw[i]);
      r.scene = sim::step(world, r.scene, a);
      logs[e].actions.push_back(a);
      logs[e].steps = step + 1;
      if (sim::evaluate_success(world, episodes[e].task, r.scene)) {
        logs[e].success = true;
        r.done = true;
      } else if (step + 1 == cfg.max_steps) {
        r.done = true;
      }
      if (step >= k && step - k > 0) {
        r.frames.erase(step - k);
        r.states.erase(step - k);
      }
    }
  }
  return logs;
}

std::string verify_episode(const sim::World& world, const EpisodeLog& log) {
  if (log.actions.size() != log.steps) return "action count differs from the step count";
  sim::SceneState s = log.task.initial;
  if (sim::scene_hash(world, s) != log.scene_hash) return "initial scene hash differs";
  for (std::size_t i = 0; i < log.actions.size(); ++i) {
    s = sim::step(world, s, log.actions[i]);
    const bool ok = sim::evaluate_success(world, log.task, s);
    if (ok && i + 1 < log.actions.size()) return "success reached early at step " + std::to_string(i + 1);
    if (i + 1 == log.actions.size() && ok != log.success) return "success flag differs";
  }
  if (log.actions.empty() && log.success) return "success without steps";
  return {};
}

}  // namespace surfer::train
