#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surfer/sim/types.hpp"

namespace surfer::taskgen {

enum class Provenance { Template, Llm, HumanSeed };
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);

enum class CueKind { Name, Function, Appearance, SpatialObject, SpatialRobot };
std::string_view cue_kind_name(CueKind k);
CueKind parse_cue_kind(std::string_view s);

// How the target is referred to. For spatial cues `relation` holds the
// quadrant code of the target relative to `anchor` (LF, LB, RF, RB) or one of
// leftmost/rightmost/nearest/farthest.
struct Cue {
  CueKind kind = CueKind::Name;
  std::string value;
  std::string anchor;
  std::string relation;
  friend bool operator==(const Cue&, const Cue&) = default;
};

struct Instruction {
  std::string id;
  int level = 1;
  sim::Skill skill = sim::Skill::Pick;
  std::string target;
  std::string secondary;  // move-near only
  std::string text;
  Provenance provenance = Provenance::Template;
  Cue cue;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Lower-case alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// Lower-cased, whitespace-collapsed, trailing punctuation removed.
std::string normalize_text(std::string_view text);

// Stable id derived from the normalized text.
std::string instruction_id(std::string_view text);

bool contains_token(std::string_view text, std::string_view token);

std::string quadrant_phrase(std::string_view rela);  // "LF" -> "left-front"
std::optional<std::string> quadrant_from_phrase(std::string_view text);

nlohmann::ordered_json to_json(const Instruction& ins);
Instruction instruction_from_json(const nlohmann::ordered_json& j);

// One Instruction per line, stable field order.
std::string to_jsonl(const std::vector<Instruction>& corpus);
std::vector<Instruction> read_jsonl(const std::string& contents);

}  // namespace surfer::taskgen
