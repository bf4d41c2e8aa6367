#include "surfer/planner/skills.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfer/common/errors.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::planner {

using sim::Skill;
using Kind = Waypoint::Kind;

namespace {

constexpr double kPreContactGap = 2.0;  // clearance between effector and object before contact
constexpr double kHoverAboveTop = 4.0;
constexpr double kGraspAboveTop = 1.0;
constexpr double kReleaseHeight = 0.5;
constexpr double kDoorStandoff = 1.5;
constexpr double kDoorApproach = 4.0;

sim::RobotState at(const sim::RobotState& base, double x, double y, double z) {
  sim::RobotState r = base;
  r.x = x;
  r.y = y;
  r.z = z;
  return r;
}

Waypoint move(Kind kind, const sim::RobotState& target, std::vector<std::size_t> skip = {}) {
  Waypoint w;
  w.kind = kind;
  w.target = target;
  w.skip = std::move(skip);
  return w;
}

Waypoint grip(const sim::RobotState& base, double value) {
  Waypoint w;
  w.kind = Kind::Grip;
  w.target = base;
  w.target.gripper = value;
  return w;
}

double tallest(const sim::World& world, const sim::SceneState& s) {
  double h = 0.0;
  for (const auto& o : s.objects) h = std::max(h, world.spec(o).height);
  return h;
}

// Pick: hover, descend to just above the top, close, lift.
void append_pick(const sim::World& world, const sim::SceneState& s, std::size_t target, std::vector<Waypoint>& out,
                 double lift_to) {
  const auto& st = s.objects[target].state;
  const double h = world.spec(s.objects[target]).height;
  const sim::RobotState base = s.robot;
  out.push_back(move(Kind::Plan, at(base, st.x, st.y, h + kHoverAboveTop)));
  out.push_back(move(Kind::Direct, at(base, st.x, st.y, h + kGraspAboveTop)));
  out.push_back(grip(at(base, st.x, st.y, h + kGraspAboveTop), 0.0));
  out.push_back(move(Kind::Direct, at(base, st.x, st.y, lift_to)));
}

// Translate the object by `distance` along (dx, dy) with contact at `fraction` of its height.
void append_push(const sim::World& world, const sim::SceneState& s, std::size_t target, double dx, double dy,
                 double distance, double fraction, std::vector<Waypoint>& out) {
  const auto& st = s.objects[target].state;
  const auto& spec = world.spec(s.objects[target]);
  const double z = fraction * spec.height;
  const double standoff = spec.footprint_radius + sim::kEffectorRadius + kPreContactGap;
  const double contact = spec.footprint_radius + sim::kEffectorRadius;
  out.push_back(move(Kind::Plan, at(s.robot, st.x - dx * standoff, st.y - dy * standoff, z)));
  const double travel = distance - contact;
  out.push_back(move(Kind::Direct, at(s.robot, st.x + dx * travel, st.y + dy * travel, z)));
}

bool side_clear(const sim::World& world, const sim::SceneState& s, std::size_t target, double side) {
  const auto& t = s.objects[target].state;
  const double rt = world.spec(s.objects[target]).footprint_radius;
  const double end = t.x + side * kPushDistance;
  if (end - rt < sim::kTable.x_min || end + rt > sim::kTable.x_max) return false;
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j == target) continue;
    const auto& o = s.objects[j].state;
    const double ro = world.spec(s.objects[j]).footprint_radius;
    const double along = side * (o.x - t.x);
    if (std::abs(o.y - t.y) < rt + ro + 2.0 && along > -(rt + ro + 6.0) && along < kPushDistance + rt + ro + 2.0) return false;
  }
  return true;
}

// Release point near `anchor` for an object of radius `r`, preferring the side facing `from`.
std::pair<double, double> release_point(const sim::World& world, const sim::SceneState& s, std::size_t moving,
                                        std::size_t anchor) {
  const auto& a = s.objects[anchor].state;
  const auto& m = s.objects[moving].state;
  const double rm = world.spec(s.objects[moving]).footprint_radius;
  const double ra = world.spec(s.objects[anchor]).footprint_radius;
  const double d = std::max(kNearDistance, rm + ra + 0.75);
  const double base = std::atan2(m.y - a.y, m.x - a.x);
  for (int k = 0; k < 16; ++k) {
    const int sign = (k % 2 == 0) ? 1 : -1;
    const double ang = base + sign * ((k + 1) / 2) * (std::numbers::pi / 8.0);
    const double px = a.x + d * std::cos(ang), py = a.y + d * std::sin(ang);
    if (px - rm < sim::kTable.x_min || px + rm > sim::kTable.x_max || py - rm < sim::kTable.y_min ||
        py + rm > sim::kTable.y_max)
      continue;
    bool clear = true;
    for (std::size_t j = 0; j < s.objects.size() && clear; ++j) {
      if (j == moving || j == anchor) continue;
      const auto& o = s.objects[j].state;
      const auto& spec = world.spec(s.objects[j]);
      double reach = spec.footprint_radius + rm + 1.0;
      if (spec.articulated) reach = spec.footprint_radius * std::sqrt(2.0) + spec.footprint_radius * 2.0 + rm;
      clear = std::hypot(px - o.x, py - o.y) >= reach;
    }
    if (clear) return {px, py};
  }
  throw PlanningError("no free release point near " + world.spec(s.objects[anchor]).name);
}

}  // namespace

std::vector<Waypoint> skill_script(const sim::World& world, const sim::TaskSpec& task) {
  sim::validate_task(world, task);
  const sim::SceneState& s = task.initial;
  const std::size_t t = task.target;
  const auto& spec = world.spec(s.objects[t]);
  const auto& st = s.objects[t].state;
  std::vector<Waypoint> out;

  switch (task.skill) {
    case Skill::Pick:
      append_pick(world, s, t, out, spec.height + kGraspAboveTop + kLiftHeight);
      break;

    case Skill::Place: {
      if (s.attached != t) throw TaskDefinitionError("place starts with the target in hand");
      const double z = spec.height + kReleaseHeight;  // grasp offset is -height
      out.push_back(move(Kind::Direct, at(s.robot, s.robot.x, s.robot.y, z)));
      out.push_back(grip(at(s.robot, s.robot.x, s.robot.y, z), 1.0));
      break;
    }

    case Skill::MoveNear: {
      const std::size_t b = *task.secondary;
      const double carry = std::min(sim::kWorkZMax, spec.height + kGraspAboveTop + std::max(kLiftHeight, tallest(world, s) + 3.0));
      append_pick(world, s, t, out, carry);
      const auto [px, py] = release_point(world, s, t, b);
      // Plan around obstacles while carrying; descend beside the anchor and let go.
      out.push_back(move(Kind::Plan, at(s.robot, px, py, carry), {t}));
      const double release_z = spec.height + kGraspAboveTop + kReleaseHeight;
      out.push_back(move(Kind::Direct, at(s.robot, px, py, release_z)));
      out.push_back(grip(at(s.robot, px, py, release_z), 1.0));
      break;
    }

    case Skill::PushFront:
      append_push(world, s, t, 0.0, 1.0, kPushDistance, kPushContactFraction, out);
      break;

    case Skill::PushAside: {
      const double side = side_clear(world, s, t, st.x <= 0.0 ? 1.0 : -1.0) ? (st.x <= 0.0 ? 1.0 : -1.0)
                          : side_clear(world, s, t, st.x <= 0.0 ? -1.0 : 1.0) ? (st.x <= 0.0 ? -1.0 : 1.0)
                                                                               : 0.0;
      if (side == 0.0) throw PlanningError("no free side to push " + spec.name);
      append_push(world, s, t, side, 0.0, kPushDistance, kPushContactFraction, out);
      break;
    }

    case Skill::KnockOver: {
      const double z = kKnockContactFraction * spec.height;
      const double standoff = spec.footprint_radius + sim::kEffectorRadius + kPreContactGap;
      out.push_back(move(Kind::Plan, at(s.robot, st.x, st.y - standoff, z)));
      out.push_back(move(Kind::Direct, at(s.robot, st.x, st.y + standoff + 2.0, z)));
      break;
    }

    case Skill::OpenDoor:
    case Skill::CloseDoor: {
      const sim::DoorGeometry g = sim::door_geometry(spec, st);
      const bool open = task.skill == Skill::OpenDoor;
      double ex, ey, px, py;
      if (open) {
        // Stand just in front of the closed handle.
        ex = g.handle_x;
        ey = g.handle_y - kDoorStandoff;
        px = ex;
        py = ey - kDoorApproach;
      } else {
        // Stand radially outside the handle of the open door.
        const double ux = (g.handle_x - g.hinge_x) / g.handle_radius;
        const double uy = (g.handle_y - g.hinge_y) / g.handle_radius;
        ex = g.handle_x + ux * kDoorStandoff;
        ey = g.handle_y + uy * kDoorStandoff;
        px = ex + ux * kDoorApproach;
        py = ey + uy * kDoorApproach;
      }
      out.push_back(move(Kind::Plan, at(s.robot, px, py, g.handle_z)));
      out.push_back(move(Kind::Direct, at(s.robot, ex, ey, g.handle_z)));
      Waypoint arc;
      arc.kind = Kind::Arc;
      arc.target = at(s.robot, ex, ey, g.handle_z);
      arc.door = t;
      arc.hinge_target_deg = open ? kOpenTargetDeg : kCloseTargetDeg;
      arc.max_step = 1.8;
      out.push_back(arc);
      break;
    }
  }
  return out;
}

}  // namespace surfer::planner
