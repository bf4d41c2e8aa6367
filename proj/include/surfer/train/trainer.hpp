#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/model/surfer.hpp"
#include "surfer/planner/executor.hpp"
#include "surfer/tensor/adam.hpp"

namespace surfer::train {

enum class Schedule { Constant, Cosine };

struct TrainConfig {
  std::size_t batch = 32;
  std::size_t steps = 20000;
  tensor::AdamConfig adam{};
  Schedule schedule = Schedule::Cosine;
  std::size_t warmup = 200;        // linear warm-up steps
  double final_lr_fraction = 0.1;  // cosine floor as a fraction of the peak rate
  std::uint64_t seed = 0;          // parameter init and sampling
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 1000;
  std::string dataset;             // recorded in the model card only

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);

// Learning rate applied at a 0-based step.
double learning_rate(const TrainConfig& cfg, std::size_t step);

// One (trajectory, step) training example.
struct SampleRef {
  std::size_t trajectory = 0;
  std::size_t t = 0;
};

// Every (trajectory, step) pair, trajectory-major.
std::vector<SampleRef> sample_index(const std::vector<planner::Trajectory>& data);

// Examples drawn uniformly with replacement for one step; a pure function of
// (seed, step).
std::vector<SampleRef> batch_samples(const std::vector<SampleRef>& index, const TrainConfig& cfg, std::size_t step);

// Window, label action and next frame for each example, rendered from the
// stored scenes (top view).
model::Batch build_batch(const sim::World& world, const std::vector<planner::Trajectory>& data,
                         const std::vector<SampleRef>& samples, const model::ModelConfig& cfg);

struct LossRow {
  std::size_t step = 0;
  double action = 0.0;
  double scene = 0.0;
  double total = 0.0;
};

std::string loss_curve_csv(const std::vector<LossRow>& rows);

struct TrainOutputs {
  std::filesystem::path checkpoint;  // model checkpoint, card written beside it
  std::filesystem::path loss_curve;  // CSV: step,l_act,l_scene,l_total
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();  // merged into the card
  std::function<void(const LossRow&)> progress;  // called for every logged row
};

struct TrainResult {
  tensor::ParamStore params;
  std::vector<LossRow> curve;
  std::size_t steps = 0;
};

// Adam on the joint loss over uniformly sampled examples. The loss of the
// batch drawn at step s is measured before the update of step s; rows are
// logged at every multiple of log_every and at the last step. With outputs,
// the checkpoint is written at step 0, every checkpoint_every steps and at
// the end, and the curve after every logged row. A non-finite loss or
// gradient rethrows NumericError; the checkpoint on disk then holds the last
// parameters saved before the failure.
TrainResult train(const sim::World& world, const std::vector<planner::Trajectory>& data,
                  const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs = std::nullopt);

}  // namespace surfer::train
