#include "surfer/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/sim/render.hpp"

namespace surfer::train {

using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kSampleStream = 0x5A3B1E;

std::string_view schedule_name(Schedule s) { return s == Schedule::Cosine ? "cosine" : "constant"; }

Schedule parse_schedule(std::string_view s) {
  if (s == "cosine") return Schedule::Cosine;
  if (s == "constant") return Schedule::Constant;
  throw ConfigError("unknown learning-rate schedule '" + std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("train batch size must be at least 1");
  if (steps == 0) throw ConfigError("train steps must be at least 1");
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw ConfigError("learning rate must be positive");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (final_lr_fraction < 0.0 || final_lr_fraction > 1.0) throw ConfigError("final lr fraction must lie in [0, 1]");
  if (log_every == 0) throw ConfigError("log cadence must be at least 1");
  if (checkpoint_every == 0) throw ConfigError("checkpoint cadence must be at least 1");
}

ordered_json to_json(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"steps", c.steps},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"schedule", schedule_name(c.schedule)},
          {"warmup", c.warmup},
          {"final_lr_fraction", c.final_lr_fraction},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"dataset", c.dataset}};
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig c;
  try {
    c.batch = j.value("batch", c.batch);
    c.steps = j.value("steps", c.steps);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("adam_eps", c.adam.eps);
    c.schedule = parse_schedule(j.value("schedule", std::string(schedule_name(c.schedule))));
    c.warmup = j.value("warmup", c.warmup);
    c.final_lr_fraction = j.value("final_lr_fraction", c.final_lr_fraction);
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.dataset = j.value("dataset", c.dataset);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double learning_rate(const TrainConfig& cfg, std::size_t step) {
  const double peak = cfg.adam.lr;
  if (step < cfg.warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
  if (cfg.schedule == Schedule::Constant) return peak;
  const std::size_t span = cfg.steps > cfg.warmup ? cfg.steps - cfg.warmup : 1;
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup) / static_cast<double>(span));
  const double floor = cfg.final_lr_fraction * peak;
  return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<SampleRef> sample_index(const std::vector<planner::Trajectory>& data) {
  std::vector<SampleRef> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t t = 0; t < data[i].length(); ++t) out.push_back({i, t});
  return out;
}

std::vector<SampleRef> batch_samples(const std::vector<SampleRef>& index, const TrainConfig& cfg, std::size_t step) {
  if (index.empty()) throw ConfigError("no examples to sample from");
  Rng rng(Rng::derive(cfg.seed, {kSampleStream, step}));
  std::vector<SampleRef> out(cfg.batch);
  for (auto& s : out) s = index[rng.index(index.size())];
  return out;
}

model::Batch build_batch(const sim::World& world, const std::vector<planner::Trajectory>& data,
                         const std::vector<SampleRef>& samples, const model::ModelConfig& cfg) {
  std::vector<model::ModelInput> inputs;
  std::vector<sim::Action> actions;
  std::vector<sim::Image> next;
  inputs.reserve(samples.size());
  for (const SampleRef& s : samples) {
    const planner::Trajectory& traj = data.at(s.trajectory);
    if (s.t >= traj.length()) throw ConfigError("sample step outside trajectory " + traj.episode_id);
    model::ModelInput in;
    const auto idx = model::window_indices(s.t, cfg.k);
    for (std::size_t j : idx) {
      const sim::SceneState& scene = traj.scene_at(j);
      in.images.push_back(sim::render(world, scene, sim::View::Top));
      in.states.push_back(scene.robot);
    }
    in.padded = s.t < cfg.k;
    in.tokens = model::instruction_token_ids(traj.instruction.text, cfg);
    inputs.push_back(std::move(in));
    actions.push_back(traj.steps[s.t].action);
    next.push_back(sim::render(world, traj.scene_at(s.t + 1), sim::View::Top));
  }
  return model::make_batch(inputs, cfg, actions, next);
}

std::string loss_curve_csv(const std::vector<LossRow>& rows) {
  std::string out = "step,l_act,l_scene,l_total\n";
  for (const LossRow& r : rows) {
    out += std::to_string(r.step) + "," + format_double(r.action) + "," + format_double(r.scene) + "," +
           format_double(r.total) + "\n";
  }
  return out;
}

TrainResult train(const sim::World& world, const std::vector<planner::Trajectory>& data,
                  const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs) {
  model_cfg.validate();
  cfg.validate();
  if (data.empty()) throw ConfigError("training dataset is empty");
  const std::vector<SampleRef> index = sample_index(data);
  if (index.empty()) throw ConfigError("training dataset has no steps");

  TrainResult result;
  result.params = model::init_params(model_cfg, cfg.seed);
  tensor::AdamState adam;
  adam.config = cfg.adam;

  auto save = [&](std::size_t step, bool final) {
    if (!outputs) return;
    ordered_json meta = outputs->metadata;
    meta["train"] = to_json(cfg);
    meta["step"] = step;
    meta["complete"] = final;
    meta["trajectories"] = data.size();
    meta["samples"] = index.size();
    model::save_model(outputs->checkpoint, result.params, model_cfg, meta);
  };
  auto write_curve = [&] {
    if (outputs && !outputs->loss_curve.empty()) write_file(outputs->loss_curve, loss_curve_csv(result.curve));
  };

  save(0, false);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const model::Batch batch = build_batch(world, data, batch_samples(index, cfg, step), model_cfg);

    tensor::Tape tape;
    const model::SurferNet net(model_cfg, tape, result.params);
    model::SurferNet::Loss loss;
    tensor::GradMap grads;
    try {
      loss = net.loss(batch);
      if (!std::isfinite(loss.total.value().item())) throw NumericError("non-finite total loss");
      grads = net.params().gradients(tape.backward(loss.total));
      adam.config.lr = learning_rate(cfg, step);
      tensor::adam_step(result.params, grads, adam);
    } catch (const NumericError& e) {
      write_curve();
      throw NumericError("training aborted at step " + std::to_string(step) + ": " + e.what());
    }

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      result.curve.push_back({step, loss.action.value().item(), loss.scene.value().item(), loss.total.value().item()});
      write_curve();
      if (outputs && outputs->progress) outputs->progress(result.curve.back());
    }
    result.steps = step + 1;
    if (result.steps % cfg.checkpoint_every == 0 && result.steps != cfg.steps) save(result.steps, false);
  }
  save(result.steps, true);
  return result;
}

}  // namespace surfer::train
