#include "surfer/taskgen/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfer/common/errors.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::taskgen {

using sim::ObjectSpec;
using sim::SceneObject;
using sim::SceneState;
using sim::Skill;

namespace {

struct Request {
  int level = 1;
  Skill skill = Skill::Pick;
  std::size_t target = 0;
  std::optional<std::size_t> secondary;
  std::optional<Cue> cue;
  std::optional<std::size_t> anchor;
};

bool has_tag(const std::vector<std::string>& tags, const std::string& tag) {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

bool shares_cue_tag(const ObjectSpec& spec, const Cue& cue) {
  if (cue.kind == CueKind::Function) return has_tag(spec.function_tags, cue.value);
  if (cue.kind == CueKind::Appearance) return has_tag(spec.appearance_tags, cue.value);
  return false;
}

double dist(const sim::ObjectState& a, const sim::ObjectState& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::size_t object_count(int level, DistractorMode mode, Rng& rng) {
  if (mode == DistractorMode::Many) return static_cast<std::size_t>(rng.integer(4, 6));
  if (level == 1) return 1;
  return static_cast<std::size_t>(rng.integer(2, 3));
}

// Constraints shared by every skill: bounds, gaps and the door swing area.
bool layout_ok(const sim::World& world, const SceneState& s) {
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const ObjectSpec& si = world.spec(s.objects[i]);
    for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
      const ObjectSpec& sj = world.spec(s.objects[j]);
      if (dist(s.objects[i].state, s.objects[j].state) < si.footprint_radius + sj.footprint_radius + kMinGap) return false;
    }
    if (si.articulated) {
      const sim::DoorGeometry g = sim::door_geometry(si, s.objects[i].state);
      for (std::size_t j = 0; j < s.objects.size(); ++j) {
        if (j == i) continue;
        const auto& o = s.objects[j].state;
        const double r = world.spec(s.objects[j]).footprint_radius;
        const bool in_swing = std::hypot(o.x - g.hinge_x, o.y - g.hinge_y) < g.length + r + 4.0 &&
                              o.y < s.objects[i].state.y + si.footprint_radius;
        if (in_swing) return false;
      }
    }
  }
  return true;
}

bool free_corridor(const sim::World& world, const SceneState& s, std::size_t target, double dirx, double diry,
                   double ahead, double behind) {
  const auto& t = s.objects[target].state;
  const double rt = world.spec(s.objects[target]).footprint_radius;
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j == target) continue;
    const auto& o = s.objects[j].state;
    const double ro = world.spec(s.objects[j]).footprint_radius;
    const double along = (o.x - t.x) * dirx + (o.y - t.y) * diry;
    const double across = std::abs(-(o.x - t.x) * diry + (o.y - t.y) * dirx);
    if (across < rt + ro + kMinGap && along > -(rt + behind + ro) && along < rt + ahead + ro) return false;
  }
  return true;
}

bool skill_ok(const sim::World& world, const SceneState& s, const Request& rq) {
  const auto& t = s.objects[0].state;
  const double rt = world.spec(s.objects[0]).footprint_radius;
  switch (rq.skill) {
    case Skill::PushFront:
      return t.y <= 36.0 && free_corridor(world, s, 0, 0.0, 1.0, 16.0, 8.0);
    case Skill::KnockOver:
      return t.y <= 40.0 && free_corridor(world, s, 0, 0.0, 1.0, world.spec(s.objects[0]).height + 4.0, 8.0);
    case Skill::PushAside: {
      for (double side : {-1.0, 1.0}) {
        const double end = t.x + side * 14.0;
        if (end - rt < sim::kTable.x_min || end + rt > sim::kTable.x_max) continue;
        if (free_corridor(world, s, 0, side, 0.0, 16.0, 8.0)) return true;
      }
      return false;
    }
    case Skill::MoveNear:
      return dist(t, s.objects[1].state) >= 16.0;
    default:
      return true;
  }
}

bool extreme_holds(const sim::World&, const SceneState& s, std::size_t target, const std::string& which) {
  const auto& t = s.objects[target].state;
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j == target) continue;
    const auto& o = s.objects[j].state;
    bool ok = false;
    if (which == "leftmost") ok = t.x < o.x - kSpatialMargin;
    else if (which == "rightmost") ok = t.x > o.x + kSpatialMargin;
    else if (which == "nearest") ok = std::hypot(t.x, t.y) < std::hypot(o.x, o.y) - kSpatialMargin;
    else if (which == "farthest") ok = std::hypot(t.x, t.y) > std::hypot(o.x, o.y) + kSpatialMargin;
    if (!ok) return false;
  }
  return true;
}

void place_object(const sim::World& world, SceneObject& obj, const Request& rq, bool is_target, Rng& rng) {
  const ObjectSpec& spec = world.spec(obj);
  auto& st = obj.state;
  if (spec.articulated) {
    st.x = rng.uniform(sim::kTable.x_min + spec.footprint_radius, sim::kTable.x_max - spec.footprint_radius);
    st.y = rng.uniform(40.0, sim::kTable.y_max - spec.footprint_radius);
    st.yaw = 0.0;
    if (is_target && rq.skill == Skill::CloseDoor) st.hinge_deg = rng.uniform(kCloseDoorMin, kCloseDoorMax);
    return;
  }
  st.x = rng.uniform(sim::kTable.x_min + spec.footprint_radius, sim::kTable.x_max - spec.footprint_radius);
  st.y = rng.uniform(sim::kTable.y_min + spec.footprint_radius, sim::kTable.y_max - spec.footprint_radius);
  st.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
}

sim::TaskSpec build(const sim::World& world, const Request& rq, std::uint64_t seed, const SceneOptions& opts) {
  Rng rng(seed);
  std::vector<std::size_t> tables = opts.tables;
  if (tables.empty())
    for (std::size_t i = 0; i < world.tables.size(); ++i) tables.push_back(i);
  const std::size_t table = tables[rng.index(tables.size())];

  // Fixed roles first: target, secondary, anchor; then distractors.
  std::vector<std::size_t> chosen{rq.target};
  if (rq.secondary) chosen.push_back(*rq.secondary);
  if (rq.anchor && std::find(chosen.begin(), chosen.end(), *rq.anchor) == chosen.end()) chosen.push_back(*rq.anchor);
  std::size_t n = std::max(object_count(rq.level, opts.distractors, rng), chosen.size());

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
    if (rq.cue && shares_cue_tag(world.objects[i], *rq.cue)) continue;
    pool.push_back(i);
  }
  // At most one articulated object per scene.
  bool has_articulated = false;
  for (std::size_t c : chosen) has_articulated = has_articulated || world.objects[c].articulated;
  while (chosen.size() < n && !pool.empty()) {
    const std::size_t pick = rng.index(pool.size());
    const std::size_t spec = pool[pick];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    if (world.objects[spec].articulated && has_articulated) continue;
    has_articulated = has_articulated || world.objects[spec].articulated;
    chosen.push_back(spec);
  }
  if (chosen.size() < n) throw GenerationError("object library too small for the requested scene");

  SceneState s;
  s.table_id = table;
  s.robot = sim::kHomePose;
  for (std::size_t spec : chosen) s.objects.push_back(SceneObject{spec, {}});

  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    // Sequential placement: each object gets a few tries against those already placed.
    bool placed = true;
    for (std::size_t i = 0; i < s.objects.size() && placed; ++i) {
      placed = false;
      for (int k = 0; k < 50 && !placed; ++k) {
        s.objects[i].state = {};
        place_object(world, s.objects[i], rq, i == 0, rng);
        SceneState partial = s;
        partial.objects.resize(i + 1);
        placed = layout_ok(world, partial);
      }
    }
    if (!placed || !skill_ok(world, s, rq)) continue;
    if (rq.cue && !cue_holds(world, s, 0, *rq.cue)) continue;

    if (rq.skill == Skill::Place) {
      auto& t = s.objects[0];
      const double h = world.spec(t).height;
      s.robot.x = t.state.x;
      s.robot.y = t.state.y;
      s.robot.z = h + kPlaceHoldHeight;
      s.robot.gripper = 0.0;
      s.attached = 0;
      s.grasp_offset = {0.0, 0.0, -h, 0.0};
      t.state.grasped = true;
      t.state.z = s.robot.z + s.grasp_offset.dz;
      t.state.yaw = s.robot.yaw + s.grasp_offset.dyaw;
      t.state.x = s.robot.x + s.grasp_offset.dx;
      t.state.y = s.robot.y + s.grasp_offset.dy;
    }
    sim::TaskSpec task{rq.skill, 0, rq.secondary ? std::optional<std::size_t>(1) : std::nullopt, s};
    sim::validate_task(world, task);
    return task;
  }
  throw GenerationError("scene placement failed after " + std::to_string(opts.max_attempts) + " attempts");
}

}  // namespace

std::vector<Skill> skills_for_level(int level) {
  if (level < 1 || level > 4) throw ConfigError("level must be in 1..4");
  std::vector<Skill> out;
  for (Skill s : sim::kAllSkills)
    if (!(level == 1 && s == Skill::MoveNear)) out.push_back(s);
  return out;
}

std::vector<std::size_t> compatible_targets(const sim::World& world, Skill skill) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const ObjectSpec& s = world.objects[i];
    const bool light = s.mass == sim::MassClass::Light && !s.articulated;
    bool ok = false;
    switch (skill) {
      case Skill::Pick:
      case Skill::Place:
      case Skill::MoveNear: ok = s.graspable; break;
      case Skill::OpenDoor:
      case Skill::CloseDoor: ok = s.articulated; break;
      case Skill::PushFront:
      case Skill::PushAside: ok = light; break;
      case Skill::KnockOver: ok = light && s.tall(); break;
    }
    if (ok) out.push_back(i);
  }
  return out;
}

bool near_compatible(const sim::World& world, std::size_t target, std::size_t secondary) {
  if (target == secondary) return false;
  const ObjectSpec& a = world.objects[target];
  const ObjectSpec& b = world.objects[secondary];
  return !b.articulated && a.footprint_radius + b.footprint_radius <= 9.0;
}

bool cue_holds(const sim::World& world, const SceneState& scene, std::size_t target, const Cue& cue) {
  const auto& objs = scene.objects;
  switch (cue.kind) {
    case CueKind::Name:
      return true;
    case CueKind::Function:
    case CueKind::Appearance:
      if (!shares_cue_tag(world.spec(objs[target]), cue)) return false;
      for (std::size_t j = 0; j < objs.size(); ++j)
        if (j != target && shares_cue_tag(world.spec(objs[j]), cue)) return false;
      return true;
    case CueKind::SpatialObject: {
      std::optional<std::size_t> anchor;
      for (std::size_t j = 0; j < objs.size(); ++j)
        if (j != target && world.spec(objs[j]).name == cue.anchor) anchor = j;
      if (!anchor) return false;
      const auto& a = objs[*anchor].state;
      const auto& t = objs[target].state;
      if (std::abs(t.x - a.x) < kSpatialMargin || std::abs(t.y - a.y) < kSpatialMargin) return false;
      if (sim::spatial_relation(a, t).rela != cue.relation) return false;
      for (std::size_t j = 0; j < objs.size(); ++j) {
        if (j == target || j == *anchor) continue;
        if (sim::spatial_relation(a, objs[j].state).rela == cue.relation) return false;
      }
      return true;
    }
    case CueKind::SpatialRobot:
      return extreme_holds(world, scene, target, cue.relation);
  }
  return false;
}

sim::TaskSpec generate_scene(const sim::World& world, int level, std::uint64_t seed, const SceneOptions& opts) {
  Rng rng(Rng::derive(seed, {0x5CE7E}));
  const auto skills = skills_for_level(level);
  Request rq;
  rq.level = level;
  rq.skill = skills[rng.index(skills.size())];
  const auto targets = compatible_targets(world, rq.skill);
  if (targets.empty()) throw GenerationError("no compatible target for " + std::string(sim::skill_name(rq.skill)));
  rq.target = targets[rng.index(targets.size())];
  if (rq.skill == Skill::MoveNear) {
    std::vector<std::size_t> partners;
    for (std::size_t i = 0; i < world.objects.size(); ++i)
      if (near_compatible(world, rq.target, i)) partners.push_back(i);
    rq.secondary = partners[rng.index(partners.size())];
  }
  return build(world, rq, rng.next_u64(), opts);
}

sim::TaskSpec generate_scene_for(const sim::World& world, const Instruction& ins, std::uint64_t seed,
                                 const SceneOptions& opts) {
  Request rq;
  rq.level = ins.level;
  rq.skill = ins.skill;
  rq.target = world.objects.index_of(ins.target);
  if (ins.skill == Skill::MoveNear) rq.secondary = world.objects.index_of(ins.secondary);
  if (ins.cue.kind != CueKind::Name) rq.cue = ins.cue;
  if (ins.cue.kind == CueKind::SpatialObject) rq.anchor = world.objects.index_of(ins.cue.anchor);
  if (ins.level == 1 && (rq.secondary || rq.anchor)) throw GenerationError("level-1 scenes hold a single object");
  return build(world, rq, Rng::derive(seed, {0x5CE7F}), opts);
}

}  // namespace surfer::taskgen
