#pragma once

#include <cmath>
#include <vector>

#include "surfer/planner/geometry.hpp"
#include "surfer/sim/types.hpp"

namespace surfer::test {

// Dense re-check of a planned path: samples every segment at `resolution`
// and tests each sample against the obstacles with its own containment code.
inline bool dense_path_clear(const std::vector<sim::RobotState>& path, const std::vector<planner::Obstacle>& obstacles,
                             double margin, double resolution = 0.1) {
  auto inside = [&](double x, double y, double z) {
    for (const auto& o : obstacles) {
      if (z < o.z_min - margin || z > o.z_max + margin) continue;
      const double r = o.half_extent + margin;
      const double dx = x - o.x, dy = y - o.y;
      if (o.shape == planner::Obstacle::Shape::Cylinder) {
        if (dx * dx + dy * dy <= r * r) return true;
      } else if (std::fabs(dx) <= r && std::fabs(dy) <= r) {
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& a = path[i];
    const auto& b = path[i + 1];
    const double len = std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) + (b.z - a.z) * (b.z - a.z));
    const int n = std::max(1, static_cast<int>(std::ceil(len / resolution)));
    for (int k = 0; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      if (inside(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t)) return false;
    }
  }
  return true;
}

}  // namespace surfer::test
