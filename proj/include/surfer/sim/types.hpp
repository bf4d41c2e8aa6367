#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// World units are centimeters and radians. Hinge angles are degrees.
// Frame: robot base at the origin, +x to the robot's right, +y away from the
// robot ("front"), +z up from the table plane.
namespace surfer::sim {

enum class Skill : std::uint8_t { Pick, Place, MoveNear, OpenDoor, CloseDoor, PushFront, PushAside, KnockOver };

inline constexpr std::array<Skill, 8> kAllSkills = {Skill::Pick,      Skill::Place,     Skill::MoveNear,
                                                    Skill::OpenDoor,  Skill::CloseDoor, Skill::PushFront,
                                                    Skill::PushAside, Skill::KnockOver};

std::string_view skill_name(Skill s);
Skill parse_skill(std::string_view name);

enum class MassClass : std::uint8_t { Light, Heavy };

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;  // each in [0, 1]
};

struct ObjectSpec {
  std::string name;
  double footprint_radius = 0.0;
  double height = 0.0;
  Rgb color;
  std::vector<std::string> appearance_tags;
  std::vector<std::string> function_tags;
  bool graspable = false;
  bool articulated = false;
  MassClass mass = MassClass::Light;

  // Tall enough to be knocked over.
  bool tall() const { return !articulated && height >= 3.0 * footprint_radius; }
};

struct ObjectState {
  double x = 0.0, y = 0.0;
  double z = 0.0;  // bottom elevation above the table plane
  double yaw = 0.0;
  bool upright = true;
  double hinge_deg = 0.0;
  bool grasped = false;
};

struct RobotState {
  double x = 0.0, y = 0.0, z = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;
  double gripper = 1.0;  // 1 open, 0 closed

  std::array<double, 7> to_array() const { return {x, y, z, roll, pitch, yaw, gripper}; }
  static RobotState from_array(const std::array<double, 7>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]}; }
  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct Action {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double droll = 0.0, dpitch = 0.0, dyaw = 0.0;
  double dgrip = 0.0;

  std::array<double, 7> to_array() const { return {dx, dy, dz, droll, dpitch, dyaw, dgrip}; }
  static Action from_array(const std::array<double, 7>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]}; }
  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr double kMaxTranslation = 2.0;
inline constexpr double kMaxRotation = 0.2;
inline constexpr double kMaxGripDelta = 0.25;

// Component-wise clamp into the legal action box.
Action clamp_action(const Action& a);
bool within_bounds(const Action& a);

struct SceneObject {
  std::size_t spec = 0;  // index into the object library
  ObjectState state;
  friend bool operator==(const SceneObject& a, const SceneObject& b) {
    const ObjectState &s = a.state, &t = b.state;
    return a.spec == b.spec && s.x == t.x && s.y == t.y && s.z == t.z && s.yaw == t.yaw && s.upright == t.upright &&
           s.hinge_deg == t.hinge_deg && s.grasped == t.grasped;
  }
};

// Rigid offset of an attached object relative to the end-effector.
struct GraspOffset {
  double dx = 0.0, dy = 0.0, dz = 0.0, dyaw = 0.0;
  friend bool operator==(const GraspOffset&, const GraspOffset&) = default;
};

struct SceneState {
  std::size_t table_id = 0;
  std::vector<SceneObject> objects;
  RobotState robot;
  std::optional<std::size_t> attached;
  GraspOffset grasp_offset;
  std::uint64_t step_count = 0;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

struct TaskSpec {
  Skill skill = Skill::Pick;
  std::size_t target = 0;                // index into SceneState::objects
  std::optional<std::size_t> secondary;  // MoveNear only
  SceneState initial;
};

struct Relation {
  std::string rela;  // LF, LB, RF or RB
  double dist = 0.0;
  friend bool operator==(const Relation&, const Relation&) = default;
};

// Table extent shared by every table in the library.
struct TableBounds {
  double x_min = -28.0, x_max = 28.0, y_min = 16.0, y_max = 56.0;
};
inline constexpr TableBounds kTable{};

// Reachable end-effector box.
inline constexpr double kWorkXMin = -34.0, kWorkXMax = 34.0;
inline constexpr double kWorkYMin = 0.0, kWorkYMax = 70.0;
inline constexpr double kWorkZMax = 50.0;

inline constexpr RobotState kHomePose{0.0, 8.0, 30.0, 0.0, 0.0, 0.0, 1.0};

}  // namespace surfer::sim
