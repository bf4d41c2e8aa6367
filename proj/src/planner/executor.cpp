#include "surfer/planner/executor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfer/common/errors.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/sim/serialize.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::planner {

namespace {

class Runner {
 public:
  Runner(const sim::World& world, const sim::TaskSpec& task, std::size_t cap)
      : world_(world), task_(task), cap_(cap), scene_(task.initial) {}

  // Returns false once the episode is over (success or cap).
  bool act(const sim::Action& a) {
    if (done()) return false;
    const sim::Action clamped = sim::clamp_action(a);
    sim::SceneState next = sim::step(world_, scene_, clamped);
    traj_.steps.push_back({scene_.robot, clamped, next});
    scene_ = std::move(next);
    if (sim::evaluate_success(world_, task_, scene_)) succeeded_ = true;
    return !done();
  }

  bool done() const { return succeeded_ || traj_.steps.size() >= cap_; }
  const sim::SceneState& scene() const { return scene_; }
  bool succeeded() const { return succeeded_; }
  Trajectory finish() {
    traj_.task = task_;
    traj_.success = succeeded_;
    return std::move(traj_);
  }

  // Walks a polyline in increments of at most max_step.
  void follow(const std::vector<Point3>& points, double max_step) {
    for (std::size_t i = 1; i < points.size() && !done(); ++i) {
      const double len = distance(points[i - 1], points[i]);
      const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len / max_step - 1e-9)));
      for (std::size_t k = 1; k <= n && !done(); ++k) {
        const Point3 p = lerp(points[i - 1], points[i], static_cast<double>(k) / static_cast<double>(n));
        const auto& r = scene_.robot;
        act({p.x - r.x, p.y - r.y, p.z - r.z, 0, 0, 0, 0});
      }
    }
  }

 private:
  const sim::World& world_;
  const sim::TaskSpec& task_;
  std::size_t cap_;
  sim::SceneState scene_;
  Trajectory traj_;
  bool succeeded_ = false;
};

CarriedLoad load_of(const sim::World& world, const sim::SceneState& s) {
  const auto& spec = world.spec(s.objects[*s.attached]);
  return {spec.footprint_radius, -s.grasp_offset.dz};
}

void run_arc(const sim::World& world, Runner& run, const Waypoint& w) {
  const auto& spec = world.spec(run.scene().objects[w.door]);
  for (int guard = 0; guard < 200 && !run.done(); ++guard) {
    const auto& s = run.scene();
    const sim::DoorGeometry g = sim::door_geometry(spec, s.objects[w.door].state);
    const double remaining = w.hinge_target_deg - s.objects[w.door].state.hinge_deg;
    if (std::abs(remaining) < 0.5) return;
    const double rx = s.robot.x - g.hinge_x, ry = s.robot.y - g.hinge_y;
    const double radius = std::hypot(rx, ry);
    const double bearing = std::atan2(-ry, rx);
    const double max_delta = w.max_step / radius;
    const double delta = std::clamp(remaining * std::numbers::pi / 180.0, -max_delta, max_delta);
    const double nx = g.hinge_x + radius * std::cos(bearing + delta);
    const double ny = g.hinge_y - radius * std::sin(bearing + delta);
    run.act({nx - s.robot.x, ny - s.robot.y, 0, 0, 0, 0, 0});
  }
}

}  // namespace

Trajectory execute_waypoints(const sim::World& world, const sim::TaskSpec& task, const std::vector<Waypoint>& waypoints,
                             const PlannerConfig& cfg, std::size_t cap) {
  Runner run(world, task, cap);
  std::uint64_t plan_index = 0;
  for (const Waypoint& w : waypoints) {
    if (run.done()) break;
    switch (w.kind) {
      case Waypoint::Kind::Grip:
        while (!run.done() && std::abs(run.scene().robot.gripper - w.target.gripper) > 1e-12) {
          run.act({0, 0, 0, 0, 0, 0, w.target.gripper - run.scene().robot.gripper});
        }
        break;
      case Waypoint::Kind::Direct:
        run.follow({position_of(run.scene().robot), position_of(w.target)}, w.max_step);
        break;
      case Waypoint::Kind::Plan: {
        const auto& s = run.scene();
        CarriedLoad load;
        const bool carrying = s.attached.has_value();
        if (carrying) load = load_of(world, s);
        const auto obstacles = scene_obstacles(world, s, w.skip, carrying ? &load : nullptr);
        PlannerConfig local = cfg;
        local.seed = Rng::derive(cfg.seed, {plan_index++});
        sim::RobotState goal = s.robot;
        goal.x = w.target.x;
        goal.y = w.target.y;
        goal.z = w.target.z;
        const auto path = rrt_plan(s.robot, goal, obstacles, local);
        std::vector<Point3> pts;
        for (const auto& r : path) pts.push_back(position_of(r));
        run.follow(pts, std::min(w.max_step, cfg.step));
        break;
      }
      case Waypoint::Kind::Arc:
        run_arc(world, run, w);
        break;
    }
  }
  return run.finish();
}

Trajectory run_expert(const sim::World& world, const sim::TaskSpec& task, const PlannerConfig& cfg, std::size_t cap) {
  return execute_waypoints(world, task, skill_script(world, task), cfg, cap);
}

std::string verify_replay(const sim::World& world, const Trajectory& traj) {
  sim::SceneState s = traj.task.initial;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& st = traj.steps[i];
    if (!(s.robot == st.robot)) return "step " + std::to_string(i) + ": robot state differs";
    if (!sim::within_bounds(st.action)) return "step " + std::to_string(i) + ": action outside clamp bounds";
    s = sim::step(world, s, st.action);
    if (!(s == st.after)) return "step " + std::to_string(i) + ": post-step state differs";
  }
  if (sim::evaluate_success(world, traj.task, s) != traj.success) return "success flag differs";
  return {};
}

nlohmann::ordered_json trajectory_to_json(const sim::World& world, const Trajectory& traj) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["episode_id"] = traj.episode_id;
  j["instruction"] = taskgen::to_json(traj.instruction);
  j["task"] = sim::task_to_json(world, traj.task);
  j["success"] = traj.success;
  j["length"] = traj.length();
  ordered_json steps = ordered_json::array();
  for (const auto& st : traj.steps) {
    ordered_json objs = ordered_json::array();
    for (const auto& o : st.after.objects) {
      const auto& v = o.state;
      objs.push_back(ordered_json::array({v.x, v.y, v.z, v.yaw, v.upright, v.hinge_deg, v.grasped}));
    }
    const auto& g = st.after.grasp_offset;
    steps.push_back(ordered_json{{"robot", ordered_json(st.robot.to_array())},
                                 {"action", sim::action_to_json(st.action)},
                                 {"objects", std::move(objs)},
                                 {"attached", st.after.attached ? ordered_json(*st.after.attached) : ordered_json(nullptr)},
                                 {"grasp_offset", ordered_json::array({g.dx, g.dy, g.dz, g.dyaw})}});
  }
  j["steps"] = std::move(steps);
  j["final_robot"] = traj.final_scene().robot.to_array();
  return j;
}

Trajectory trajectory_from_json(const sim::World& world, const nlohmann::ordered_json& j) {
  try {
    Trajectory t;
    t.episode_id = j.at("episode_id").get<std::string>();
    t.instruction = taskgen::instruction_from_json(j.at("instruction"));
    t.task = sim::task_from_json(world, j.at("task"));
    t.success = j.at("success").get<bool>();
    sim::SceneState prev = t.task.initial;
    for (const auto& sj : j.at("steps")) {
      TrajectoryStep st;
      st.robot = sim::RobotState::from_array(sj.at("robot").get<std::array<double, 7>>());
      st.action = sim::action_from_json(sj.at("action"));
      st.after = prev;
      st.after.robot = prev.robot;
      const auto& objs = sj.at("objects");
      if (objs.size() != prev.objects.size()) throw ConfigError("trajectory: object count changed");
      for (std::size_t i = 0; i < objs.size(); ++i) {
        auto& v = st.after.objects[i].state;
        v.x = objs[i][0].get<double>();
        v.y = objs[i][1].get<double>();
        v.z = objs[i][2].get<double>();
        v.yaw = objs[i][3].get<double>();
        v.upright = objs[i][4].get<bool>();
        v.hinge_deg = objs[i][5].get<double>();
        v.grasped = objs[i][6].get<bool>();
      }
      st.after.attached.reset();
      if (!sj.at("attached").is_null()) st.after.attached = sj.at("attached").get<std::size_t>();
      const auto g = sj.at("grasp_offset").get<std::array<double, 4>>();
      st.after.grasp_offset = {g[0], g[1], g[2], g[3]};
      st.after.step_count = prev.step_count + 1;
      t.steps.push_back(st);
      prev = st.after;
    }
    // The post-step robot is the next step's pre-step robot, or the stored final pose.
    for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) t.steps[i].after.robot = t.steps[i + 1].robot;
    if (!t.steps.empty()) {
      t.steps.back().after.robot = sim::RobotState::from_array(j.at("final_robot").get<std::array<double, 7>>());
    }
    if (j.at("length").get<std::size_t>() != t.steps.size()) throw ConfigError("trajectory: length mismatch");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed trajectory record: ") + e.what());
  }
}

}  // namespace surfer::planner
