#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/planner/demos.hpp"
#include "surfer/train/ablation.hpp"

namespace surfer::cli {

// Parsed key/value file: section -> key -> raw value. Keys before the first
// section header belong to [run].
using KeyValues = std::map<std::string, std::map<std::string, std::string>>;

// Format: `[section]` headers, `key = value` lines, blank lines and lines
// starting with # or ; ignored. Throws ConfigError with the line number.
KeyValues parse_key_values(const std::string& text);

// "section.key=value" -> (section, key, value).
struct Override {
  std::string section, key, value;
};
Override parse_override(const std::string& text);

struct Paths {
  std::filesystem::path data_dir;              // object, table and lexicon files
  std::filesystem::path out_root = ".";        // every output lands under it
  std::vector<std::filesystem::path> instructions;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
};

struct InstructionOptions {
  int level = 1;
  std::size_t count = 0;  // 0 selects the desk corpus size of the level
  std::string mode = "template";
  int llm_attempts = 3;
};

struct LlmSettings {
  std::string url;                // empty falls back to SURFER_LLM_URL
  int timeout_seconds = 30;
  std::filesystem::path fixture;  // replay file used instead of the endpoint
};

struct RunConfig {
  std::uint64_t seed = 0;
  Paths paths;
  InstructionOptions instructions;
  LlmSettings llm;
  planner::DemoConfig demos;  // its planner field holds [planner]
  model::ModelConfig model;
  train::TrainConfig train;
  train::EvalConfig eval;
  train::AblationConfig ablation;  // variants, validation cadence, no-sp check

  // Effective values by section, as written to run manifests. Seeds are
  // filled from `seed`.
  nlohmann::ordered_json snapshot() const;
};

// Defaults, then the file, then overrides in order. Validates every section
// and copies the run seed into every consumer.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<Override>& overrides,
                          const std::filesystem::path& default_data_dir);

}  // namespace surfer::cli
