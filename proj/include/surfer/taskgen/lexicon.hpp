#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "surfer/sim/library.hpp"
#include "surfer/taskgen/instruction.hpp"

namespace surfer::taskgen {

struct SeedInstruction {
  int level = 2;
  sim::Skill skill = sim::Skill::Pick;
  std::string text;
};

// Verb, template and referring-expression tables plus the human seed pool.
struct Lexicon {
  std::map<sim::Skill, std::vector<std::string>> verbs;      // level-1 verbs
  std::map<sim::Skill, std::vector<std::string>> templates;  // levels 2-4, with {obj} and {b}
  std::map<CueKind, std::vector<std::string>> referring;
  std::vector<SeedInstruction> seeds;

  // Reads verbs.tsv, templates.tsv, referring.tsv and seed_instructions.jsonl.
  static Lexicon load(const std::filesystem::path& data_dir);

  const std::vector<std::string>& verbs_for(sim::Skill s) const;
  const std::vector<std::string>& templates_for(sim::Skill s) const;
  const std::vector<std::string>& forms_for(CueKind k) const;
};

struct ObjectDescription {
  std::string appearance;
  std::string function;
};

// Curated attribute lookup; throws ConfigError for unknown objects.
ObjectDescription describe_object(const sim::World& world, std::string_view name);

}  // namespace surfer::taskgen
