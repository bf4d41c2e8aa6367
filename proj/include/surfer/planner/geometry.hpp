#pragma once

#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::planner {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

double distance(const Point3& a, const Point3& b);
Point3 lerp(const Point3& a, const Point3& b, double t);
Point3 position_of(const sim::RobotState& r);

// Vertical prism occupied by a scene object, already grown by the size of
// whatever moves through the workspace (effector or carried object).
struct Obstacle {
  enum class Shape { Cylinder, Box };
  Shape shape = Shape::Cylinder;
  double x = 0.0, y = 0.0;
  double half_extent = 0.0;  // radius, or half side for boxes
  double z_min = 0.0, z_max = 0.0;
};

// True if the point lies inside the obstacle grown by `margin`.
bool point_in_obstacle(const Point3& p, const Obstacle& o, double margin);
bool point_free(const Point3& p, const std::vector<Obstacle>& obstacles, double margin);

// Exact segment test against every obstacle grown by `margin`.
bool segment_free(const Point3& a, const Point3& b, const std::vector<Obstacle>& obstacles, double margin);

bool in_workspace(const Point3& p);

struct CarriedLoad {
  double radius = 0.0;
  double height = 0.0;  // extent below the effector
};

// Obstacles for every scene object except those listed in `skip`. The
// effector (or the carried load, if any) is folded into the obstacle size.
std::vector<Obstacle> scene_obstacles(const sim::World& world, const sim::SceneState& scene,
                                      const std::vector<std::size_t>& skip, const CarriedLoad* load = nullptr);

}  // namespace surfer::planner
