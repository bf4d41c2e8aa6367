#include "surfer/planner/rrt.hpp"

#include <cmath>
#include <limits>

#include "surfer/common/errors.hpp"
#include "surfer/common/rng.hpp"

namespace surfer::planner {

namespace {

// Slack on top of the configured margin so that points sampled densely along
// an accepted segment are strictly clear.
constexpr double kSlack = 1e-6;

struct Node {
  Point3 p;
  std::size_t parent;
};

}  // namespace

void validate(const PlannerConfig& cfg) {
  if (!(cfg.step > 0.0) || cfg.step > sim::kMaxTranslation) throw ConfigError("planner step must lie in (0, 2] cm");
  if (cfg.goal_bias < 0.0 || cfg.goal_bias > 1.0) throw ConfigError("planner goal bias must lie in [0, 1]");
  if (cfg.max_iterations <= 0) throw ConfigError("planner max iterations must be positive");
  if (cfg.margin < 0.0) throw ConfigError("planner margin must be non-negative");
}

std::vector<Point3> shortcut(const std::vector<Point3>& path, const std::vector<Obstacle>& obstacles, double margin) {
  if (path.size() <= 2) return path;
  std::vector<Point3> out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !segment_free(path[i], path[j], obstacles, margin)) --j;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

std::vector<sim::RobotState> rrt_plan(const sim::RobotState& start, const sim::RobotState& goal,
                                      const std::vector<Obstacle>& obstacles, const PlannerConfig& cfg) {
  validate(cfg);
  const double margin = cfg.margin + kSlack;
  const Point3 s = position_of(start), g = position_of(goal);
  if (!point_free(s, obstacles, margin)) throw PlanningError("start configuration is in collision");
  if (!point_free(g, obstacles, margin)) throw PlanningError("goal configuration is in collision");
  if (!in_workspace(g)) throw PlanningError("goal outside the workspace");

  std::vector<Point3> points;
  if (segment_free(s, g, obstacles, margin)) {
    points = {s, g};
  } else {
    Rng rng(cfg.seed);
    std::vector<Node> tree{{s, 0}};
    std::size_t reached = std::numeric_limits<std::size_t>::max();
    for (int it = 0; it < cfg.max_iterations && reached == std::numeric_limits<std::size_t>::max(); ++it) {
      Point3 q = g;
      if (!rng.bernoulli(cfg.goal_bias)) {
        q = {rng.uniform(sim::kWorkXMin, sim::kWorkXMax), rng.uniform(sim::kWorkYMin, sim::kWorkYMax),
             rng.uniform(0.0, sim::kWorkZMax)};
      }
      std::size_t near = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < tree.size(); ++k) {
        const double d = distance(tree[k].p, q);
        if (d < best) {
          best = d;
          near = k;
        }
      }
      const Point3 from = tree[near].p;
      const Point3 to = best <= cfg.step ? q : lerp(from, q, cfg.step / best);
      if (!in_workspace(to) || !segment_free(from, to, obstacles, margin)) continue;
      tree.push_back({to, near});
      if (distance(to, g) <= cfg.step && segment_free(to, g, obstacles, margin)) {
        tree.push_back({g, tree.size() - 1});
        reached = tree.size() - 1;
      }
    }
    if (reached == std::numeric_limits<std::size_t>::max()) {
      throw PlanningError("rrt exhausted " + std::to_string(cfg.max_iterations) + " iterations");
    }
    for (std::size_t k = reached;; k = tree[k].parent) {
      points.push_back(tree[k].p);
      if (k == 0) break;
    }
    std::reverse(points.begin(), points.end());
    points = shortcut(points, obstacles, margin);
  }

  // Attach orientation and gripper by arc-length fraction.
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
  std::vector<sim::RobotState> out;
  double run = 0.0;
  const auto a = start.to_array(), b = goal.to_array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) run += distance(points[i - 1], points[i]);
    const double t = total > 0.0 ? run / total : 1.0;
    std::array<double, 7> v{};
    for (std::size_t k = 3; k < 7; ++k) v[k] = a[k] + (b[k] - a[k]) * t;
    v[0] = points[i].x;
    v[1] = points[i].y;
    v[2] = points[i].z;
    out.push_back(sim::RobotState::from_array(v));
  }
  out.front() = start;
  out.back() = goal;
  return out;
}

double path_length(const std::vector<sim::RobotState>& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += distance(position_of(path[i - 1]), position_of(path[i]));
  return total;
}

}  // namespace surfer::planner
