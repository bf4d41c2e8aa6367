#pragma once

#include <string>

#include <json.hpp>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::sim {

// Scene snapshot schema, keys in this order:
//   table_id, step_count,
//   robot {x, y, z, roll, pitch, yaw, gripper},
//   attached (object index or null), grasp_offset {dx, dy, dz, dyaw},
//   objects [{name, x, y, z, yaw, upright, hinge_deg, grasped}]
// Doubles are written with round-trip precision.
nlohmann::ordered_json scene_to_json(const World& world, const SceneState& state);
SceneState scene_from_json(const World& world, const nlohmann::ordered_json& j);

nlohmann::ordered_json robot_to_json(const RobotState& r);
RobotState robot_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json action_to_json(const Action& a);
Action action_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json task_to_json(const World& world, const TaskSpec& task);
TaskSpec task_from_json(const World& world, const nlohmann::ordered_json& j);

// Stable content hash of a scene snapshot.
std::string scene_hash(const World& world, const SceneState& state);

}  // namespace surfer::sim
