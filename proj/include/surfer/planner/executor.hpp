#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfer/planner/rrt.hpp"
#include "surfer/planner/skills.hpp"
#include "surfer/sim/library.hpp"
#include "surfer/taskgen/instruction.hpp"

namespace surfer::planner {

inline constexpr std::size_t kEpisodeCap = 120;

struct TrajectoryStep {
  sim::RobotState robot;  // before the action
  sim::Action action;
  sim::SceneState after;
};

struct Trajectory {
  std::string episode_id;
  taskgen::Instruction instruction;
  sim::TaskSpec task;
  std::vector<TrajectoryStep> steps;
  bool success = false;

  std::size_t length() const { return steps.size(); }
  // Scene before step i (i == length() gives the final scene).
  const sim::SceneState& scene_at(std::size_t i) const { return i == 0 ? task.initial : steps[i - 1].after; }
  const sim::SceneState& final_scene() const { return scene_at(steps.size()); }
};

// Steps the simulator through the waypoints, stopping at the first step whose
// state satisfies the task. Exceeding `cap` marks the trajectory failed.
// Planning failures propagate as PlanningError.
Trajectory execute_waypoints(const sim::World& world, const sim::TaskSpec& task, const std::vector<Waypoint>& waypoints,
                             const PlannerConfig& cfg, std::size_t cap = kEpisodeCap);

// Plans and executes the scripted expert for a task.
Trajectory run_expert(const sim::World& world, const sim::TaskSpec& task, const PlannerConfig& cfg,
                      std::size_t cap = kEpisodeCap);

// Replays the stored actions from the initial scene. Returns an empty string
// when every stored state and the success flag are reproduced exactly.
std::string verify_replay(const sim::World& world, const Trajectory& traj);

// Compact line format: per step the pre-step robot, the action and the
// post-step object states. Frames are not stored.
nlohmann::ordered_json trajectory_to_json(const sim::World& world, const Trajectory& traj);
Trajectory trajectory_from_json(const sim::World& world, const nlohmann::ordered_json& j);

}  // namespace surfer::planner
