#include "surfer/sim/serialize.hpp"

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::sim {

using nlohmann::ordered_json;

namespace {

template <typename T>
T field(const ordered_json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("scene json: missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene json: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

ordered_json robot_to_json(const RobotState& r) {
  return ordered_json{{"x", r.x}, {"y", r.y}, {"z", r.z}, {"roll", r.roll},
                      {"pitch", r.pitch}, {"yaw", r.yaw}, {"gripper", r.gripper}};
}

RobotState robot_from_json(const ordered_json& j) {
  return {field<double>(j, "x"),     field<double>(j, "y"),   field<double>(j, "z"),      field<double>(j, "roll"),
          field<double>(j, "pitch"), field<double>(j, "yaw"), field<double>(j, "gripper")};
}

ordered_json action_to_json(const Action& a) {
  return ordered_json::array({a.dx, a.dy, a.dz, a.droll, a.dpitch, a.dyaw, a.dgrip});
}

Action action_from_json(const ordered_json& j) {
  if (!j.is_array() || j.size() != 7) throw ConfigError("action json: expected an array of 7 numbers");
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) v[i] = j[i].get<double>();
  return Action::from_array(v);
}

ordered_json scene_to_json(const World& world, const SceneState& state) {
  ordered_json j;
  j["table_id"] = state.table_id;
  j["step_count"] = state.step_count;
  j["robot"] = robot_to_json(state.robot);
  j["attached"] = state.attached ? ordered_json(*state.attached) : ordered_json(nullptr);
  const GraspOffset& g = state.grasp_offset;
  j["grasp_offset"] = ordered_json{{"dx", g.dx}, {"dy", g.dy}, {"dz", g.dz}, {"dyaw", g.dyaw}};
  ordered_json objs = ordered_json::array();
  for (const auto& o : state.objects) {
    const ObjectState& s = o.state;
    objs.push_back(ordered_json{{"name", world.objects[o.spec].name},
                                {"x", s.x},
                                {"y", s.y},
                                {"z", s.z},
                                {"yaw", s.yaw},
                                {"upright", s.upright},
                                {"hinge_deg", s.hinge_deg},
                                {"grasped", s.grasped}});
  }
  j["objects"] = std::move(objs);
  return j;
}

SceneState scene_from_json(const World& world, const ordered_json& j) {
  SceneState s;
  s.table_id = field<std::size_t>(j, "table_id");
  if (s.table_id >= world.tables.size()) throw ConfigError("scene json: unknown table id");
  s.step_count = field<std::uint64_t>(j, "step_count");
  s.robot = robot_from_json(j.at("robot"));
  if (j.contains("attached") && !j.at("attached").is_null()) s.attached = j.at("attached").get<std::size_t>();
  if (j.contains("grasp_offset")) {
    const auto& g = j.at("grasp_offset");
    s.grasp_offset = {field<double>(g, "dx"), field<double>(g, "dy"), field<double>(g, "dz"), field<double>(g, "dyaw")};
  }
  for (const auto& o : field<ordered_json>(j, "objects")) {
    SceneObject so;
    so.spec = world.objects.index_of(field<std::string>(o, "name"));
    so.state.x = field<double>(o, "x");
    so.state.y = field<double>(o, "y");
    so.state.z = field<double>(o, "z");
    so.state.yaw = field<double>(o, "yaw");
    so.state.upright = field<bool>(o, "upright");
    so.state.hinge_deg = field<double>(o, "hinge_deg");
    so.state.grasped = field<bool>(o, "grasped");
    s.objects.push_back(so);
  }
  if (s.attached && *s.attached >= s.objects.size()) throw ConfigError("scene json: attached index out of range");
  return s;
}

ordered_json task_to_json(const World& world, const TaskSpec& task) {
  ordered_json j;
  j["skill"] = std::string(skill_name(task.skill));
  j["target"] = task.target;
  j["secondary"] = task.secondary ? ordered_json(*task.secondary) : ordered_json(nullptr);
  j["initial"] = scene_to_json(world, task.initial);
  return j;
}

TaskSpec task_from_json(const World& world, const ordered_json& j) {
  TaskSpec t;
  t.skill = parse_skill(field<std::string>(j, "skill"));
  t.target = field<std::size_t>(j, "target");
  if (j.contains("secondary") && !j.at("secondary").is_null()) t.secondary = j.at("secondary").get<std::size_t>();
  t.initial = scene_from_json(world, j.at("initial"));
  return t;
}

std::string scene_hash(const World& world, const SceneState& state) {
  return hash_hex(scene_to_json(world, state).dump());
}

}  // namespace surfer::sim
