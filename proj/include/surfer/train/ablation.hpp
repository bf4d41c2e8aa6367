#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/train/eval.hpp"
#include "surfer/train/trainer.hpp"

namespace surfer::train {

struct AblationConfig {
  std::vector<model::Variant> variants{model::Variant::Full, model::Variant::NoSp, model::Variant::ConcatFusion,
                                       model::Variant::InstrSp};
  model::ModelConfig model;  // shared base; variant and lambda are set per run
  TrainConfig train;
  EvalConfig eval;           // seen condition, levels 1-4
  std::size_t validation_every = 10;  // every n-th trajectory is held out for action MSE
  bool verify_no_sp = true;  // also train full with lambda 0 and compare with no-sp
};

struct VariantResult {
  model::Variant variant = model::Variant::Full;
  std::size_t parameters = 0;
  double heldout_action_mse = 0.0;
  double final_action_loss = 0.0;
  std::vector<EpisodeLog> episodes;
};

struct AblationResult {
  std::vector<VariantResult> variants;
  std::size_t train_trajectories = 0;
  std::size_t validation_trajectories = 0;
  // Present when the no-sp check ran: true when no-sp and full at lambda 0
  // end with bitwise identical shared parameters and identical loss curves.
  std::optional<bool> no_sp_matches_lambda0;
  std::string no_sp_detail;
};

// Mean action MSE of the network over every step of the trajectories.
double action_mse(const sim::World& world, const std::vector<planner::Trajectory>& data,
                  const tensor::ParamStore& params, const model::ModelConfig& cfg);

// Bitwise comparison of every parameter no-sp holds against the same name in
// `full`. Returns an empty string on a match.
std::string compare_shared_params(const tensor::ParamStore& no_sp, const tensor::ParamStore& full);

// Trains each variant with the same seed, data split and steps, then runs the
// same seen-condition episode set per level. `checkpoint_dir` (optional)
// receives one checkpoint per variant.
AblationResult ablate(const sim::World& world, const std::vector<planner::Trajectory>& data,
                      const std::vector<LevelInstructions>& levels, const AblationConfig& cfg,
                      const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

// Per-variant summary without episode logs (those are written separately).
nlohmann::ordered_json ablation_summary(const AblationResult& result);
// Rebuilds a result from a summary and the episode logs.
AblationResult ablation_from_summary(const nlohmann::ordered_json& summary, const std::vector<EpisodeLog>& logs);

// Reference changes in mean success relative to full, as reported for the
// original system (percentage points).
inline constexpr double kReferenceNoSpDelta = -6.05;
inline constexpr double kReferenceConcatDelta = -3.95;

// Variant x level table with mean, parameter count and held-out MSE, then the
// local deltas beside the reference deltas.
std::string ablation_markdown(const AblationResult& result);
std::string ablation_csv(const AblationResult& result);

}  // namespace surfer::train
