#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sim_fixtures.hpp"
#include "surfer/planner/demos.hpp"
#include "surfer/taskgen/generator.hpp"
#include "surfer/train/eval.hpp"

namespace surfer::test {

inline const taskgen::Lexicon& lexicon() {
  static const taskgen::Lexicon lex = taskgen::Lexicon::load(SURFER_DATA_DIR);
  return lex;
}

// Desk-size corpora and splits for levels 1-4.
inline std::vector<train::LevelInstructions> desk_levels(std::uint64_t seed) {
  std::vector<train::LevelInstructions> out;
  for (int level = 1; level <= 4; ++level) {
    auto corpus = taskgen::generate_corpus({world(), lexicon()}, level, taskgen::kDeskCorpusSize[level - 1], seed);
    out.push_back(train::level_instructions(level, std::move(corpus)));
  }
  return out;
}

// Training instructions of the given levels.
inline std::vector<taskgen::Instruction> training_pool(const std::vector<train::LevelInstructions>& levels,
                                                       std::vector<int> wanted) {
  std::vector<taskgen::Instruction> out;
  for (const auto& li : levels) {
    if (std::find(wanted.begin(), wanted.end(), li.level) == wanted.end()) continue;
    const auto train = taskgen::select_ids(li.corpus, li.split.train);
    out.insert(out.end(), train.begin(), train.end());
  }
  return out;
}

inline std::vector<planner::Trajectory> demos(const std::vector<train::LevelInstructions>& levels, std::size_t count,
                                              std::uint64_t seed) {
  planner::DemoConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  return planner::generate_demos(world(), training_pool(levels, {1, 2}), cfg).kept;
}

// Compact network used by the training tests.
inline model::ModelConfig tiny_model() {
  model::ModelConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.scene_layers = 1;
  cfg.k = 1;
  cfg.vocab = 128;
  return cfg;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace surfer::test
