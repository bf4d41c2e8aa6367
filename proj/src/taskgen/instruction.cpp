#include "surfer/taskgen/instruction.hpp"

#include <array>
#include <cctype>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::taskgen {

using nlohmann::ordered_json;

namespace {
constexpr std::array<std::string_view, 3> kProvenance = {"template", "llm", "human-seed"};
constexpr std::array<std::string_view, 5> kCueKinds = {"name", "function", "appearance", "spatial_object",
                                                       "spatial_robot"};
constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kQuadrants = {
    {{"LF", "left-front"}, {"LB", "left-back"}, {"RF", "right-front"}, {"RB", "right-back"}}};

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& names, std::string_view s, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return i;
  throw ConfigError(std::string("unknown ") + what + ": " + std::string(s));
}
}  // namespace

std::string_view provenance_name(Provenance p) { return kProvenance[static_cast<std::size_t>(p)]; }
Provenance parse_provenance(std::string_view s) { return static_cast<Provenance>(lookup(kProvenance, s, "provenance")); }
std::string_view cue_kind_name(CueKind k) { return kCueKinds[static_cast<std::size_t>(k)]; }
CueKind parse_cue_kind(std::string_view s) { return static_cast<CueKind>(lookup(kCueKinds, s, "cue kind")); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

std::string instruction_id(std::string_view text) { return hash_hex(normalize_text(text)); }

bool contains_token(std::string_view text, std::string_view token) {
  const auto needle = tokenize(token);
  if (needle.empty()) return false;
  const auto hay = tokenize(text);
  if (hay.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size() && match; ++k) match = hay[i + k] == needle[k];
    if (match) return true;
  }
  return false;
}

std::string quadrant_phrase(std::string_view rela) {
  for (const auto& [code, phrase] : kQuadrants)
    if (code == rela) return std::string(phrase);
  throw ConfigError("unknown quadrant: " + std::string(rela));
}

std::optional<std::string> quadrant_from_phrase(std::string_view text) {
  for (const auto& [code, phrase] : kQuadrants)
    if (text.find(phrase) != std::string_view::npos) return std::string(code);
  return std::nullopt;
}

ordered_json to_json(const Instruction& ins) {
  ordered_json j;
  j["id"] = ins.id;
  j["level"] = ins.level;
  j["skill"] = std::string(sim::skill_name(ins.skill));
  j["target"] = ins.target;
  j["secondary"] = ins.secondary;
  j["text"] = ins.text;
  j["provenance"] = std::string(provenance_name(ins.provenance));
  j["cue"] = ordered_json{{"kind", std::string(cue_kind_name(ins.cue.kind))},
                          {"value", ins.cue.value},
                          {"anchor", ins.cue.anchor},
                          {"relation", ins.cue.relation}};
  return j;
}

Instruction instruction_from_json(const ordered_json& j) {
  try {
    Instruction ins;
    ins.id = j.at("id").get<std::string>();
    ins.level = j.at("level").get<int>();
    ins.skill = sim::parse_skill(j.at("skill").get<std::string>());
    ins.target = j.at("target").get<std::string>();
    ins.secondary = j.value("secondary", std::string());
    ins.text = j.at("text").get<std::string>();
    ins.provenance = parse_provenance(j.at("provenance").get<std::string>());
    if (j.contains("cue")) {
      const auto& c = j.at("cue");
      ins.cue = {parse_cue_kind(c.at("kind").get<std::string>()), c.value("value", std::string()),
                 c.value("anchor", std::string()), c.value("relation", std::string())};
    }
    if (ins.level < 1 || ins.level > 4) throw ConfigError("instruction level out of range");
    return ins;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed instruction record: ") + e.what());
  }
}

std::string to_jsonl(const std::vector<Instruction>& corpus) {
  std::string out;
  for (const auto& ins : corpus) {
    out += to_json(ins).dump();
    out += '\n';
  }
  return out;
}

std::vector<Instruction> read_jsonl(const std::string& contents) {
  std::vector<Instruction> out;
  std::istringstream in(contents);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(instruction_from_json(ordered_json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("instruction corpus: ") + e.what());
    }
  }
  return out;
}

}  // namespace surfer::taskgen
