#pragma once

#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::planner {

inline constexpr double kLiftHeight = 12.0;       // above the 10 cm pick threshold
inline constexpr double kPushDistance = 12.0;     // above the 10 cm push threshold
inline constexpr double kOpenTargetDeg = 90.0;    // above the 80 degree threshold
inline constexpr double kCloseTargetDeg = 5.0;    // below the 10 degree threshold
inline constexpr double kPushContactFraction = 0.3;
inline constexpr double kKnockContactFraction = 0.8;
inline constexpr double kNearDistance = 8.0;

struct Waypoint {
  enum class Kind {
    Plan,    // rrt to `target` around the scene's obstacles
    Direct,  // straight line to `target`, contact allowed
    Arc,     // swing the door of `door` to `hinge_target_deg`
    Grip,    // drive the gripper to `target.gripper`
  };
  Kind kind = Kind::Direct;
  sim::RobotState target;
  double max_step = 2.0;      // cm per action
  double tolerance = 0.05;    // cm, for Plan and Direct
  std::vector<std::size_t> skip;  // objects not treated as obstacles when planning
  std::size_t door = 0;
  double hinge_target_deg = 0.0;
};

// Per-skill waypoint script for the task's initial scene. Throws
// TaskDefinitionError for skill/target mismatches and PlanningError when no
// admissible contact or release point exists.
std::vector<Waypoint> skill_script(const sim::World& world, const sim::TaskSpec& task);

}  // namespace surfer::planner
