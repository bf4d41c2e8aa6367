#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/planner/executor.hpp"
#include "surfer/taskgen/instruction.hpp"
#include "surfer/taskgen/scene_gen.hpp"

namespace surfer::planner {

struct DemoConfig {
  std::size_t count = 2000;
  std::vector<int> levels{1, 2};
  std::uint64_t seed = 0;
  std::vector<std::size_t> held_out_tables{8, 9};
  PlannerConfig planner;
  taskgen::DistractorMode distractors = taskgen::DistractorMode::Normal;
  bool keep_failures = false;
  std::size_t yield_window = 100;
  double min_yield = 0.5;
};

// Stable hash of everything in the config that affects the output.
std::string demo_config_hash(const DemoConfig& cfg);
std::string planner_config_hash(const PlannerConfig& cfg);

struct DemoResult {
  std::vector<Trajectory> kept;
  std::vector<Trajectory> failures;
  std::size_t attempted = 0;
  std::map<std::string, std::size_t> failure_reasons;
};

// Instruction-first loop: sample a training instruction, generate a fresh
// scene for it, run the scripted expert and keep successes. `instructions`
// holds the training split of every requested level. Throws PlanningError when
// the success yield over a full window drops below the configured floor.
DemoResult generate_demos(const sim::World& world, const std::vector<taskgen::Instruction>& instructions,
                          const DemoConfig& cfg);

// Writes the dataset file and returns the manifest that is written beside it
// (`<out>.manifest.json`).
nlohmann::ordered_json write_dataset(const sim::World& world, const DemoResult& result, const DemoConfig& cfg,
                                     const std::filesystem::path& out);

std::vector<Trajectory> read_dataset(const sim::World& world, const std::filesystem::path& path);

}  // namespace surfer::planner
