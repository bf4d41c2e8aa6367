#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/taskgen/instruction.hpp"
#include "surfer/taskgen/lexicon.hpp"
#include "surfer/taskgen/llm.hpp"
#include "surfer/taskgen/scene_gen.hpp"

namespace surfer::taskgen {

enum class GenerationMode { Template, Llm };
GenerationMode parse_generation_mode(std::string_view s);

// Corpus sizes per level (index 0 is level 1).
inline constexpr std::array<std::size_t, 4> kFullCorpusSize = {80, 240, 858, 2267};
inline constexpr std::array<std::size_t, 4> kDeskCorpusSize = {80, 120, 200, 300};
// Training share per level; level 1 trains and tests on the same commands.
inline constexpr std::array<std::size_t, 4> kFullTrainCount = {80, 160, 686, 2041};

// Append-only, id-deduplicated instruction store.
class InstructionPool {
 public:
  // Returns false (and leaves the pool unchanged) for a duplicate id.
  bool add(const Instruction& ins);
  bool contains(const std::string& id) const { return ids_.count(id) > 0; }
  const std::vector<Instruction>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t count(int level) const;
  std::vector<Instruction> level(int level) const;

 private:
  std::vector<Instruction> items_;
  std::unordered_set<std::string> ids_;
};

struct GenerationContext {
  const sim::World& world;
  const Lexicon& lexicon;
  GenerationMode mode = GenerationMode::Template;
  LlmClient* llm = nullptr;             // required for llm mode; nullptr forces fallback
  std::vector<std::string>* events = nullptr;  // fallback and warning messages
  int llm_attempts = 3;
};

// Deterministic template fill; throws GenerationError when the scene offers
// no unambiguous cue for the level.
Instruction template_instruction(const sim::World& world, const Lexicon& lex, int level, const sim::TaskSpec& task,
                                 std::uint64_t seed);

// Template or llm generation. llm mode validates replies and falls back to
// the template path after the configured number of rejected attempts.
Instruction generate_instruction(const GenerationContext& ctx, int level, const sim::TaskSpec& task,
                                 const InstructionPool& pool, std::uint64_t seed);

// The few-shot prompt sent to the llm endpoint.
std::string build_prompt(const sim::World& world, const Lexicon& lex, int level, const sim::TaskSpec& task,
                         const InstructionPool& pool, std::uint64_t seed);

// Checks the level constraints. With a scene, also checks that the cue
// identifies the target. Returns the first violation.
std::optional<std::string> validate_instruction(const sim::World& world, const Lexicon& lex, const Instruction& ins,
                                                const sim::SceneState* scene = nullptr,
                                                std::size_t target_index = 0);

// Generates `count` distinct instructions for one level, scene first.
std::vector<Instruction> generate_corpus(const GenerationContext& ctx, int level, std::size_t count,
                                         std::uint64_t seed, const SceneOptions& opts = {});

struct SplitSpec {
  int level = 1;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Number of training instructions for a corpus of `total` at the full-corpus ratio.
std::size_t train_size(int level, std::size_t total);

// Level 1: train == test. Levels 2-4: ids ordered by hash, first share trains.
SplitSpec build_splits(const std::vector<Instruction>& corpus, int level);

// Instructions of `corpus` whose id is in `ids`, in corpus order.
std::vector<Instruction> select_ids(const std::vector<Instruction>& corpus, const std::vector<std::string>& ids);

}  // namespace surfer::taskgen
