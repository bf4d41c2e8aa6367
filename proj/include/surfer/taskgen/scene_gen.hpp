#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"
#include "surfer/taskgen/instruction.hpp"

namespace surfer::taskgen {

enum class DistractorMode { Normal, Many };

struct SceneOptions {
  DistractorMode distractors = DistractorMode::Normal;
  std::vector<std::size_t> tables;  // allowed table ids; empty means all
  int max_attempts = 1000;
};

inline constexpr double kMinGap = 2.0;
inline constexpr double kSpatialMargin = 3.0;  // separation that keeps spatial cues unambiguous
inline constexpr double kCloseDoorMin = 60.0, kCloseDoorMax = 100.0;
inline constexpr double kPlaceHoldHeight = 8.0;

// Skills that can be expressed at a level (move-near needs two objects).
std::vector<sim::Skill> skills_for_level(int level);

// Object specs that can serve as the target of a skill.
std::vector<std::size_t> compatible_targets(const sim::World& world, sim::Skill skill);

// Secondary objects that can receive target in a move-near task.
bool near_compatible(const sim::World& world, std::size_t target, std::size_t secondary);

// Samples a skill, a compatible target and a random scene around it.
// Throws GenerationError when placement fails within max_attempts.
sim::TaskSpec generate_scene(const sim::World& world, int level, std::uint64_t seed, const SceneOptions& opts = {});

// Samples a fresh scene in which the instruction is achievable and its cue
// picks out the target unambiguously.
sim::TaskSpec generate_scene_for(const sim::World& world, const Instruction& ins, std::uint64_t seed,
                                 const SceneOptions& opts = {});

// True if the cue identifies exactly the target among the scene objects.
bool cue_holds(const sim::World& world, const sim::SceneState& scene, std::size_t target, const Cue& cue);

}  // namespace surfer::taskgen
