#include "surfer/taskgen/lexicon.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::taskgen {

namespace {

std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError(path.filename().string() + ": expected two tab-separated fields");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

Lexicon Lexicon::load(const std::filesystem::path& data_dir) {
  Lexicon lex;
  for (const auto& [skill, list] : read_pairs(data_dir / "verbs.tsv")) {
    auto& v = lex.verbs[sim::parse_skill(skill)];
    std::istringstream ss(list);
    std::string verb;
    while (std::getline(ss, verb, ';'))
      if (!verb.empty()) v.push_back(verb);
  }
  for (const auto& [skill, text] : read_pairs(data_dir / "templates.tsv")) {
    if (text.find("{obj}") == std::string::npos) throw ConfigError("template without {obj}: " + text);
    lex.templates[sim::parse_skill(skill)].push_back(text);
  }
  for (const auto& [kind, form] : read_pairs(data_dir / "referring.tsv")) lex.referring[parse_cue_kind(kind)].push_back(form);

  std::istringstream seeds(read_file(data_dir / "seed_instructions.jsonl"));
  std::string line;
  while (std::getline(seeds, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    lex.seeds.push_back({j.at("level").get<int>(), sim::parse_skill(j.at("skill").get<std::string>()),
                         j.at("text").get<std::string>()});
  }
  for (int level = 2; level <= 4; ++level) {
    bool any = false;
    for (const auto& s : lex.seeds) any = any || s.level == level;
    if (!any) throw ConfigError("seed pool is empty for level " + std::to_string(level));
  }
  for (sim::Skill s : sim::kAllSkills) {
    if (lex.templates_for(s).empty()) throw ConfigError("no templates for skill " + std::string(sim::skill_name(s)));
  }
  return lex;
}

const std::vector<std::string>& Lexicon::verbs_for(sim::Skill s) const {
  static const std::vector<std::string> kEmpty;
  auto it = verbs.find(s);
  return it == verbs.end() ? kEmpty : it->second;
}

const std::vector<std::string>& Lexicon::templates_for(sim::Skill s) const {
  static const std::vector<std::string> kEmpty;
  auto it = templates.find(s);
  return it == templates.end() ? kEmpty : it->second;
}

const std::vector<std::string>& Lexicon::forms_for(CueKind k) const {
  auto it = referring.find(k);
  if (it == referring.end() || it->second.empty()) {
    throw ConfigError("no referring forms for cue kind " + std::string(cue_kind_name(k)));
  }
  return it->second;
}

ObjectDescription describe_object(const sim::World& world, std::string_view name) {
  const sim::ObjectSpec& spec = world.objects.find(name);
  return {join(spec.appearance_tags, ", "), "used for " + join(spec.function_tags, " or ")};
}

}  // namespace surfer::taskgen
