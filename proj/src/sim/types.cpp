#include "surfer/sim/types.hpp"

#include <algorithm>
#include <string>

#include "surfer/common/errors.hpp"

namespace surfer::sim {

namespace {
constexpr std::array<std::string_view, 8> kSkillNames = {"pick",      "place",      "move_near",  "open_door",
                                                         "close_door", "push_front", "push_aside", "knock_over"};
}

std::string_view skill_name(Skill s) { return kSkillNames[static_cast<std::size_t>(s)]; }

Skill parse_skill(std::string_view name) {
  for (std::size_t i = 0; i < kSkillNames.size(); ++i) {
    if (kSkillNames[i] == name) return static_cast<Skill>(i);
  }
  throw ConfigError("unknown skill: " + std::string(name));
}

Action clamp_action(const Action& a) {
  auto t = [](double v) { return std::clamp(v, -kMaxTranslation, kMaxTranslation); };
  auto r = [](double v) { return std::clamp(v, -kMaxRotation, kMaxRotation); };
  return {t(a.dx), t(a.dy), t(a.dz), r(a.droll), r(a.dpitch), r(a.dyaw), std::clamp(a.dgrip, -kMaxGripDelta, kMaxGripDelta)};
}

bool within_bounds(const Action& a) { return clamp_action(a) == a; }

}  // namespace surfer::sim
