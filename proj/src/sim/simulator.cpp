#include "surfer/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfer/common/errors.hpp"

namespace surfer::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double wrap_degrees(double a) {
  while (a > 180.0) a -= 360.0;
  while (a <= -180.0) a += 360.0;
  return a;
}

void clamp_to_table(ObjectState& s) {
  s.x = std::clamp(s.x, kTable.x_min, kTable.x_max);
  s.y = std::clamp(s.y, kTable.y_min, kTable.y_max);
}

// Angle of a planar point around the hinge, in degrees, measured so that the
// opening direction is positive.
double hinge_bearing(const DoorGeometry& g, double x, double y) {
  return std::atan2(-(y - g.hinge_y), x - g.hinge_x) * kDeg;
}

void attach_follow(SceneState& s) {
  if (!s.attached) return;
  ObjectState& o = s.objects[*s.attached].state;
  o.x = s.robot.x + s.grasp_offset.dx;
  o.y = s.robot.y + s.grasp_offset.dy;
  o.z = s.robot.z + s.grasp_offset.dz;
  o.yaw = s.robot.yaw + s.grasp_offset.dyaw;
}

void integrate_pose(SceneState& s, const Action& a) {
  RobotState& r = s.robot;
  r.x = std::clamp(r.x + a.dx, kWorkXMin, kWorkXMax);
  r.y = std::clamp(r.y + a.dy, kWorkYMin, kWorkYMax);
  const double z_floor = s.attached ? std::max(0.0, -s.grasp_offset.dz) : 0.0;
  r.z = std::clamp(r.z + a.dz, z_floor, kWorkZMax);
  r.roll = std::clamp(r.roll + a.droll, -kPi / 2.0, kPi / 2.0);
  r.pitch = std::clamp(r.pitch + a.dpitch, -kPi / 2.0, kPi / 2.0);
  r.yaw = wrap_angle(r.yaw + a.dyaw);
  r.gripper = std::clamp(r.gripper + a.dgrip, 0.0, 1.0);
}

void grasp_logic(const World& world, SceneState& s, double previous_grip, double lateral_speed) {
  const RobotState& r = s.robot;
  if (s.attached && previous_grip <= kGripOpenThreshold && r.gripper > kGripOpenThreshold) {
    ObjectState& o = s.objects[*s.attached].state;
    if (o.z > kDropFallHeight && lateral_speed > kDropFallSpeed) o.upright = false;
    o.z = 0.0;
    o.grasped = false;
    clamp_to_table(o);
    s.attached.reset();
    s.grasp_offset = {};
    return;
  }
  if (!s.attached && previous_grip >= kGripCloseThreshold && r.gripper < kGripCloseThreshold) {
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const ObjectSpec& spec = world.spec(s.objects[i]);
      const ObjectState& o = s.objects[i].state;
      if (!spec.graspable || !o.upright) continue;
      const double horizontal = std::hypot(r.x - o.x, r.y - o.y);
      const double vertical = std::abs(r.z - (o.z + spec.height));
      if (horizontal > kGraspHorizontalReach || vertical > kGraspVerticalReach) continue;
      if (!best || horizontal < best_dist) {
        best = i;
        best_dist = horizontal;
      }
    }
    if (best) {
      ObjectState& o = s.objects[*best].state;
      s.attached = best;
      s.grasp_offset = {o.x - r.x, o.y - r.y, o.z - r.z, o.yaw - r.yaw};
      o.grasped = true;
      attach_follow(s);
    }
  }
}

struct Contact {
  std::size_t object;
  double height;  // contact height above the object's base
};

bool pushable(const ObjectSpec& spec) { return spec.mass == MassClass::Light && !spec.articulated; }

std::vector<Contact> push_logic(const World& world, SceneState& s, const RobotState& before) {
  std::vector<Contact> contacts;
  const RobotState& after = s.robot;
  for (int k = 1; k <= kPushSubsteps; ++k) {
    const double t = static_cast<double>(k) / kPushSubsteps;
    const double px = before.x + (after.x - before.x) * t;
    const double py = before.y + (after.y - before.y) * t;
    const double pz = before.z + (after.z - before.z) * t;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      if (s.attached && *s.attached == i) continue;
      const ObjectSpec& spec = world.spec(s.objects[i]);
      if (!pushable(spec)) continue;
      ObjectState& o = s.objects[i].state;
      const double top = o.z + collision_height(spec, o);
      if (pz >= top || pz + kEffectorRadius <= o.z) continue;
      const double reach = spec.footprint_radius + kEffectorRadius;
      double nx = o.x - px, ny = o.y - py;
      const double d = std::hypot(nx, ny);
      if (d >= reach) continue;
      if (d > 0.0) {
        nx /= d;
        ny /= d;
      } else {
        const double mx = after.x - before.x, my = after.y - before.y;
        const double m = std::hypot(mx, my);
        nx = m > 0.0 ? mx / m : 0.0;
        ny = m > 0.0 ? my / m : 1.0;
      }
      const double depth = reach - d;
      o.x += nx * depth;
      o.y += ny * depth;
      contacts.push_back({i, std::max(0.0, pz - o.z)});
    }
  }

  // Separate objects that were shoved into each other.
  for (int pass = 0; pass < 4; ++pass) {
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
        if (s.attached && (*s.attached == i || *s.attached == j)) continue;
        const double overlap = footprint_overlap(world, s.objects[i], s.objects[j]);
        if (overlap <= 0.0) continue;
        ObjectState& a = s.objects[i].state;
        ObjectState& b = s.objects[j].state;
        const bool a_moves = pushable(world.spec(s.objects[i]));
        const bool b_moves = pushable(world.spec(s.objects[j]));
        if (!a_moves && !b_moves) continue;
        double nx = b.x - a.x, ny = b.y - a.y;
        const double d = std::hypot(nx, ny);
        if (d > 0.0) {
          nx /= d;
          ny /= d;
        } else {
          nx = 1.0;
          ny = 0.0;
        }
        const double share_a = a_moves ? (b_moves ? 0.5 : 1.0) : 0.0;
        const double share_b = 1.0 - share_a;
        a.x -= nx * overlap * share_a;
        a.y -= ny * overlap * share_a;
        b.x += nx * overlap * share_b;
        b.y += ny * overlap * share_b;
      }
    }
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (s.attached && *s.attached == i) continue;
    clamp_to_table(s.objects[i].state);
  }
  return contacts;
}

void knock_logic(const World& world, SceneState& s, const std::vector<Contact>& contacts, const Action& a) {
  const double speed = std::hypot(a.dx, a.dy);
  if (speed <= kKnockSpeed) return;
  for (const Contact& c : contacts) {
    ObjectState& o = s.objects[c.object].state;
    const ObjectSpec& spec = world.spec(s.objects[c.object]);
    if (!o.upright) continue;
    if (c.height > kKnockHeightFraction * spec.height) {
      o.upright = false;
      o.yaw = std::atan2(a.dy, a.dx);
    }
  }
}

void hinge_logic(const World& world, SceneState& s, const RobotState& before) {
  for (auto& obj : s.objects) {
    const ObjectSpec& spec = world.spec(obj);
    if (!spec.articulated) continue;
    const DoorGeometry g = door_geometry(spec, obj.state);
    const double reach = std::hypot(before.x - g.handle_x, before.y - g.handle_y);
    if (reach > kHandleReach || before.z > spec.height || before.z < 0.0) continue;
    const double from = hinge_bearing(g, before.x, before.y);
    const double to = hinge_bearing(g, s.robot.x, s.robot.y);
    obj.state.hinge_deg = std::clamp(obj.state.hinge_deg + wrap_degrees(to - from), 0.0, kHingeMax);
  }
}

double planar_distance(const ObjectState& a, const ObjectState& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

DoorGeometry door_geometry(const ObjectSpec& spec, const ObjectState& state) {
  DoorGeometry g;
  g.hinge_x = state.x - spec.footprint_radius;
  g.hinge_y = state.y - spec.footprint_radius;
  g.length = 2.0 * spec.footprint_radius;
  g.handle_radius = g.length - 1.5;
  const double theta = state.hinge_deg / kDeg;
  g.handle_x = g.hinge_x + g.handle_radius * std::cos(theta);
  g.handle_y = g.hinge_y - g.handle_radius * std::sin(theta);
  g.handle_z = 0.5 * spec.height;
  return g;
}

double collision_height(const ObjectSpec& spec, const ObjectState& state) {
  return state.upright ? spec.height : 2.0 * spec.footprint_radius;
}

double footprint_overlap(const World& world, const SceneObject& a, const SceneObject& b) {
  return world.spec(a).footprint_radius + world.spec(b).footprint_radius - planar_distance(a.state, b.state);
}

SceneState step(const World& world, const SceneState& state, const Action& action) {
  SceneState s = state;
  const Action a = clamp_action(action);
  const RobotState before = s.robot;

  integrate_pose(s, a);
  attach_follow(s);
  grasp_logic(world, s, before.gripper, std::hypot(a.dx, a.dy));
  const auto contacts = push_logic(world, s, before);
  knock_logic(world, s, contacts, a);
  hinge_logic(world, s, before);
  ++s.step_count;
  return s;
}

void validate_task(const World& world, const TaskSpec& task) {
  const auto& objs = task.initial.objects;
  if (task.target >= objs.size()) throw TaskDefinitionError("target index out of range");
  const ObjectSpec& t = world.spec(objs[task.target]);
  const std::string what = std::string(skill_name(task.skill)) + " cannot apply to " + t.name;
  if (task.skill != Skill::MoveNear && task.secondary) throw TaskDefinitionError(what + ": unexpected secondary object");
  switch (task.skill) {
    case Skill::Pick:
    case Skill::Place:
      if (!t.graspable) throw TaskDefinitionError(what);
      break;
    case Skill::MoveNear:
      if (!t.graspable) throw TaskDefinitionError(what);
      if (!task.secondary || *task.secondary >= objs.size() || *task.secondary == task.target) {
        throw TaskDefinitionError(what + ": needs a distinct secondary object");
      }
      if (world.spec(objs[*task.secondary]).articulated) throw TaskDefinitionError(what + ": secondary is articulated");
      break;
    case Skill::OpenDoor:
    case Skill::CloseDoor:
      if (!t.articulated) throw TaskDefinitionError(what);
      break;
    case Skill::PushFront:
    case Skill::PushAside:
      if (!pushable(t)) throw TaskDefinitionError(what);
      break;
    case Skill::KnockOver:
      if (!pushable(t) || !t.tall()) throw TaskDefinitionError(what);
      break;
  }
}

bool evaluate_success(const World& world, const TaskSpec& task, const SceneState& final_state) {
  validate_task(world, task);
  if (final_state.objects.size() != task.initial.objects.size()) throw TaskDefinitionError("object count changed");
  const ObjectState& start = task.initial.objects[task.target].state;
  const ObjectState& end = final_state.objects[task.target].state;
  const double dx = end.x - start.x;
  const double dy = end.y - start.y;
  switch (task.skill) {
    case Skill::Pick:
      return end.grasped && final_state.attached == task.target && end.z >= 10.0;
    case Skill::Place:
      return end.upright && !end.grasped && end.z == 0.0 && final_state.attached != task.target;
    case Skill::MoveNear: {
      const ObjectState& other = final_state.objects[*task.secondary].state;
      return planar_distance(end, other) < 10.0 && planar_distance(end, start) > 1.0;
    }
    case Skill::OpenDoor:
      return end.hinge_deg > 80.0;
    case Skill::CloseDoor:
      return end.hinge_deg < 10.0;
    case Skill::PushFront:
      return dy >= 10.0 && std::abs(dx) < 5.0;
    case Skill::PushAside:
      return std::abs(dx) >= 10.0 && std::abs(dy) < 5.0;
    case Skill::KnockOver:
      return !end.upright && !end.grasped;
  }
  return false;
}

Relation spatial_relation(const ObjectState& a, const ObjectState& b) {
  Relation r;
  r.rela += b.x <= a.x ? 'L' : 'R';
  r.rela += b.y >= a.y ? 'F' : 'B';
  r.dist = std::round(planar_distance(a, b) * 100.0) / 100.0;
  return r;
}

std::optional<std::string> check_invariants(const World& world, const SceneState& state) {
  const RobotState& r = state.robot;
  if (r.z < 0.0) return "robot z below table plane";
  if (r.gripper < 0.0 || r.gripper > 1.0) return "gripper outside [0, 1]";
  std::size_t grasped = 0;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    const ObjectState& o = state.objects[i].state;
    const ObjectSpec& spec = world.spec(state.objects[i]);
    if (o.grasped) ++grasped;
    if (o.grasped != (state.attached == i)) return spec.name + ": grasped flag disagrees with attachment";
    if (o.hinge_deg < 0.0 || o.hinge_deg > kHingeMax) return spec.name + ": hinge angle out of range";
    if (!o.grasped && o.upright &&
        (o.x < kTable.x_min || o.x > kTable.x_max || o.y < kTable.y_min || o.y > kTable.y_max)) {
      return spec.name + ": off the table";
    }
  }
  if (grasped > 1) return "more than one grasped object";
  if (state.attached) {
    const ObjectState& o = state.objects[*state.attached].state;
    const GraspOffset& g = state.grasp_offset;
    if (o.x != r.x + g.dx || o.y != r.y + g.dy || o.z != r.z + g.dz || o.yaw != r.yaw + g.dyaw) {
      return "attached object drifted from the end-effector";
    }
  }
  return std::nullopt;
}

}  // namespace surfer::sim
