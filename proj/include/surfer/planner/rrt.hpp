#pragma once

#include <cstdint>
#include <vector>

#include "surfer/planner/geometry.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::planner {

struct PlannerConfig {
  double step = 2.0;          // tree extension length, at most the action clamp
  double goal_bias = 0.1;
  int max_iterations = 4000;
  double margin = 1.0;        // clearance added to every obstacle
  std::uint64_t seed = 0;
};

// Checks the config invariants; throws ConfigError.
void validate(const PlannerConfig& cfg);

// RRT in (x, y, z) followed by greedy shortcutting. Returns waypoints from
// start to goal with every segment collision-free. Orientation and gripper are
// interpolated linearly along the path. Throws PlanningError if start or goal
// is in collision or the iteration budget runs out.
std::vector<sim::RobotState> rrt_plan(const sim::RobotState& start, const sim::RobotState& goal,
                                      const std::vector<Obstacle>& obstacles, const PlannerConfig& cfg);

// Greedy shortcutting: from each kept vertex jump to the farthest visible one.
std::vector<Point3> shortcut(const std::vector<Point3>& path, const std::vector<Obstacle>& obstacles, double margin);

double path_length(const std::vector<sim::RobotState>& path);

}  // namespace surfer::planner
