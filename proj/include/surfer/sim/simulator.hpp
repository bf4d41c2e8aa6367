#pragma once

#include <optional>
#include <string>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::sim {

// Interaction thresholds of the kinematic model.
inline constexpr double kGripCloseThreshold = 0.4;
inline constexpr double kGripOpenThreshold = 0.6;
inline constexpr double kGraspHorizontalReach = 3.0;
inline constexpr double kGraspVerticalReach = 2.0;
inline constexpr double kEffectorRadius = 1.0;
inline constexpr double kDropFallHeight = 10.0;
inline constexpr double kDropFallSpeed = 1.0;
inline constexpr double kKnockHeightFraction = 0.6;
inline constexpr double kKnockSpeed = 1.5;
inline constexpr double kHandleReach = 2.0;
inline constexpr double kHingeMax = 120.0;
inline constexpr int kPushSubsteps = 4;

// Cabinet door geometry. The hinge sits at the front-left corner of the
// cabinet body; the closed door spans the front face toward +x and opens
// toward the robot.
struct DoorGeometry {
  double hinge_x = 0.0, hinge_y = 0.0;
  double handle_x = 0.0, handle_y = 0.0;
  double handle_z = 0.0;
  double length = 0.0;
  double handle_radius = 0.0;  // distance from hinge to handle
};
DoorGeometry door_geometry(const ObjectSpec& spec, const ObjectState& state);

// Effective vertical extent of an object (fallen objects lie on their side).
double collision_height(const ObjectSpec& spec, const ObjectState& state);

// One deterministic transition. Every action is legal after clamping.
SceneState step(const World& world, const SceneState& state, const Action& action);

// Throws TaskDefinitionError when the skill cannot apply to the target.
void validate_task(const World& world, const TaskSpec& task);

// Pure function of the task's initial snapshot and the final state.
bool evaluate_success(const World& world, const TaskSpec& task, const SceneState& final_state);

// Quadrant of b relative to a plus rounded planar distance.
Relation spatial_relation(const ObjectState& a, const ObjectState& b);

// Returns a description of the first violated state invariant, if any.
std::optional<std::string> check_invariants(const World& world, const SceneState& state);

// Pairwise footprint overlap (positive when footprints interpenetrate).
double footprint_overlap(const World& world, const SceneObject& a, const SceneObject& b);

}  // namespace surfer::sim
