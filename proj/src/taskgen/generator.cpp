#include "surfer/taskgen/generator.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/sim/simulator.hpp"

namespace surfer::taskgen {

using sim::Skill;

namespace {

constexpr std::array<std::string_view, 4> kExtremes = {"leftmost", "rightmost", "nearest", "farthest"};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

template <typename T>
const T& choose(const std::vector<T>& v, Rng& rng) {
  if (v.empty()) throw GenerationError("nothing to choose from");
  return v[rng.index(v.size())];
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
  return lower(text).find(lower(phrase)) != std::string::npos;
}

const std::string& secondary_name(const sim::World& world, const sim::TaskSpec& task) {
  static const std::string kNone;
  return task.secondary ? world.spec(task.initial.objects[*task.secondary]).name : kNone;
}

// Every cue that picks out the target unambiguously in this scene, grouped by kind.
std::vector<std::vector<Cue>> candidate_cues(const sim::World& world, const sim::TaskSpec& task, int level) {
  const auto& scene = task.initial;
  const auto& spec = world.spec(scene.objects[task.target]);
  std::vector<std::vector<Cue>> groups;
  auto keep = [&](std::vector<Cue> cues) {
    std::erase_if(cues, [&](const Cue& c) { return !cue_holds(world, scene, task.target, c); });
    if (!cues.empty()) groups.push_back(std::move(cues));
  };
  std::vector<Cue> fn;
  for (const auto& t : spec.function_tags) fn.push_back({CueKind::Function, t, "", ""});
  keep(fn);
  if (level == 3) return groups;

  std::vector<Cue> app;
  for (const auto& t : spec.appearance_tags) app.push_back({CueKind::Appearance, t, "", ""});
  keep(app);
  std::vector<Cue> rel;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j == task.target) continue;
    const auto r = sim::spatial_relation(scene.objects[j].state, scene.objects[task.target].state);
    rel.push_back({CueKind::SpatialObject, quadrant_phrase(r.rela), world.spec(scene.objects[j]).name, r.rela});
  }
  keep(rel);
  if (scene.objects.size() > 1) {
    std::vector<Cue> ext;
    for (auto e : kExtremes) ext.push_back({CueKind::SpatialRobot, std::string(e), "", std::string(e)});
    keep(ext);
  }
  return groups;
}

std::string noun_phrase(const Lexicon& lex, const Cue& cue, const std::string& name, Rng& rng) {
  std::string form = choose(lex.forms_for(cue.kind), rng);
  form = replace_all(form, "{name}", name);
  form = replace_all(form, "{tag}", cue.value);
  form = replace_all(form, "{rel}", cue.value);
  form = replace_all(form, "{anchor}", cue.anchor);
  form = replace_all(form, "{extreme}", cue.relation);
  return form;
}

std::string clean_reply(std::string text) {
  if (auto nl = text.find('\n'); nl != std::string::npos) text.resize(nl);
  auto trim = [](std::string& s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    s.erase(0, i);
  };
  trim(text);
  if (text.size() >= 2 && (text.front() == '"' || text.front() == '\'') && text.back() == text.front()) {
    text = text.substr(1, text.size() - 2);
  }
  while (!text.empty() && (text.back() == '.' || text.back() == '!')) text.pop_back();
  trim(text);
  return text;
}

// Recovers the cue an llm reply uses for the target.
Cue infer_cue(const sim::World& world, const sim::TaskSpec& task, int level, const std::string& text) {
  if (level <= 2) return {CueKind::Name, "", "", ""};
  const auto& scene = task.initial;
  const auto& spec = world.spec(scene.objects[task.target]);
  if (level == 4) {
    if (auto quad = quadrant_from_phrase(lower(text))) {
      for (std::size_t j = 0; j < scene.objects.size(); ++j) {
        const auto& name = world.spec(scene.objects[j]).name;
        if (j != task.target && contains_token(text, name)) {
          const Cue c{CueKind::SpatialObject, quadrant_phrase(*quad), name, *quad};
          if (cue_holds(world, scene, task.target, c)) return c;
        }
      }
    }
    for (auto e : kExtremes)
      if (contains_token(text, e)) return {CueKind::SpatialRobot, std::string(e), "", std::string(e)};
    for (const auto& t : spec.appearance_tags)
      if (contains_phrase(text, t)) return {CueKind::Appearance, t, "", ""};
  }
  for (const auto& t : spec.function_tags)
    if (contains_phrase(text, t)) return {CueKind::Function, t, "", ""};
  return {CueKind::Name, "", "", ""};
}

}  // namespace

GenerationMode parse_generation_mode(std::string_view s) {
  if (s == "template") return GenerationMode::Template;
  if (s == "llm") return GenerationMode::Llm;
  throw ConfigError("unknown generation mode: " + std::string(s));
}

bool InstructionPool::add(const Instruction& ins) {
  if (!ids_.insert(ins.id).second) return false;
  items_.push_back(ins);
  return true;
}

std::size_t InstructionPool::count(int level) const {
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [&](const auto& i) { return i.level == level; }));
}

std::vector<Instruction> InstructionPool::level(int lvl) const {
  std::vector<Instruction> out;
  for (const auto& i : items_)
    if (i.level == lvl) out.push_back(i);
  return out;
}

Instruction template_instruction(const sim::World& world, const Lexicon& lex, int level, const sim::TaskSpec& task,
                                 std::uint64_t seed) {
  if (level < 1 || level > 4) throw ConfigError("level must be in 1..4");
  sim::validate_task(world, task);
  Rng rng(seed);
  Instruction ins;
  ins.level = level;
  ins.skill = task.skill;
  ins.target = world.spec(task.initial.objects[task.target]).name;
  ins.secondary = secondary_name(world, task);
  ins.provenance = Provenance::Template;

  if (level == 1) {
    if (task.initial.objects.size() != 1) throw GenerationError("level-1 scenes hold a single object");
    const auto& verbs = lex.verbs_for(task.skill);
    if (verbs.empty()) throw GenerationError("no level-1 verb for " + std::string(sim::skill_name(task.skill)));
    ins.text = choose(verbs, rng) + " " + ins.target;
    ins.cue = {CueKind::Name, "", "", ""};
  } else {
    const std::string& tmpl = choose(lex.templates_for(task.skill), rng);
    Cue cue{CueKind::Name, "", "", ""};
    if (level >= 3) {
      const auto groups = candidate_cues(world, task, level);
      if (groups.empty()) throw GenerationError("no unambiguous cue for " + ins.target);
      cue = choose(choose(groups, rng), rng);
    }
    ins.cue = cue;
    ins.text = replace_all(replace_all(tmpl, "{obj}", noun_phrase(lex, cue, ins.target, rng)), "{b}", ins.secondary);
  }
  ins.id = instruction_id(ins.text);
  return ins;
}

std::string build_prompt(const sim::World& world, const Lexicon& lex, int level, const sim::TaskSpec& task,
                         const InstructionPool& pool, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream p;
  p << "You write one short command for a tabletop robot arm.\n";
  switch (level) {
    case 1: p << "Rule: write only a verb followed by the object name.\n"; break;
    case 2: p << "Rule: write a natural command that names the object.\n"; break;
    case 3: p << "Rule: never name the object; refer to it only by what it is used for.\n"; break;
    default:
      p << "Rule: never name the object; refer to it by its appearance, its use, or its position relative to "
           "another object or to the robot.\n";
  }
  std::vector<std::string> human;
  for (const auto& s : lex.seeds)
    if (s.level == level) human.push_back(s.text);
  std::vector<std::string> shots;
  for (int i = 0; i < 6 && !human.empty(); ++i) {
    const std::size_t k = rng.index(human.size());
    shots.push_back(human[k]);
    human.erase(human.begin() + static_cast<std::ptrdiff_t>(k));
  }
  auto previous = pool.level(level);
  for (int i = 0; i < 2 && !previous.empty(); ++i) {
    const std::size_t k = rng.index(previous.size());
    shots.push_back(previous[k].text);
    previous.erase(previous.begin() + static_cast<std::ptrdiff_t>(k));
  }
  p << "Examples:\n";
  for (const auto& s : shots) p << "- " << s << "\n";
  p << "Objects:\n";
  const auto& objs = task.initial.objects;
  for (const auto& o : objs) {
    const auto& spec = world.spec(o);
    const auto d = describe_object(world, spec.name);
    p << "- " << spec.name << ": looks " << d.appearance << "; " << d.function << "\n";
  }
  p << "Relations:\n";
  for (std::size_t i = 0; i < objs.size(); ++i)
    for (std::size_t j = 0; j < objs.size(); ++j) {
      if (i == j) continue;
      const auto r = sim::spatial_relation(objs[i].state, objs[j].state);
      p << "- " << world.spec(objs[j]).name << " relative to " << world.spec(objs[i]).name << ": {rela: " << r.rela
        << ", dist: " << r.dist << "}\n";
    }
  p << "Skill: " << sim::skill_name(task.skill) << "\n";
  p << "Target: " << world.spec(objs[task.target]).name << "\n";
  if (task.secondary) p << "Destination: " << world.spec(objs[*task.secondary]).name << "\n";
  p << "Command:";
  return p.str();
}

Instruction generate_instruction(const GenerationContext& ctx, int level, const sim::TaskSpec& task,
                                 const InstructionPool& pool, std::uint64_t seed) {
  if (ctx.mode == GenerationMode::Template) return template_instruction(ctx.world, ctx.lexicon, level, task, seed);
  auto note = [&](const std::string& msg) {
    if (ctx.events) ctx.events->push_back(msg);
  };
  if (!ctx.llm) {
    note("llm fallback: no endpoint configured, using templates");
    return template_instruction(ctx.world, ctx.lexicon, level, task, seed);
  }
  for (int attempt = 0; attempt < ctx.llm_attempts; ++attempt) {
    const auto prompt = build_prompt(ctx.world, ctx.lexicon, level, task, pool, Rng::derive(seed, {7, static_cast<std::uint64_t>(attempt)}));
    const auto reply = ctx.llm->complete({prompt, 64, 0.7});
    if (!reply) {
      note("llm fallback: endpoint unreachable, using templates");
      return template_instruction(ctx.world, ctx.lexicon, level, task, seed);
    }
    Instruction ins;
    ins.level = level;
    ins.skill = task.skill;
    ins.target = ctx.world.spec(task.initial.objects[task.target]).name;
    ins.secondary = secondary_name(ctx.world, task);
    ins.text = clean_reply(*reply);
    ins.provenance = Provenance::Llm;
    ins.cue = infer_cue(ctx.world, task, level, ins.text);
    ins.id = instruction_id(ins.text);
    if (!validate_instruction(ctx.world, ctx.lexicon, ins, &task.initial, task.target)) return ins;
  }
  note("llm fallback: replies violated the level rules " + std::to_string(ctx.llm_attempts) + " times, using templates");
  return template_instruction(ctx.world, ctx.lexicon, level, task, seed);
}

std::optional<std::string> validate_instruction(const sim::World& world, const Lexicon& lex, const Instruction& ins,
                                                const sim::SceneState* scene, std::size_t target_index) {
  if (ins.text.empty()) return "empty text";
  if (tokenize(ins.text).size() > 32) return "longer than 32 tokens";
  if (ins.id != instruction_id(ins.text)) return "id does not match text";
  if (ins.skill == Skill::MoveNear && (ins.secondary.empty() || !contains_token(ins.text, ins.secondary))) {
    return "move-near command must name the destination object";
  }
  switch (ins.level) {
    case 1: {
      for (const auto& v : lex.verbs_for(ins.skill))
        if (ins.text == v + " " + ins.target) return std::nullopt;
      return "level-1 text is not <verb> <name>";
    }
    case 2:
      if (!contains_token(ins.text, ins.target)) return "level-2 text must name the target";
      break;
    case 3:
    case 4: {
      if (contains_token(ins.text, ins.target)) return "text contains the target name";
      const Cue& c = ins.cue;
      if (ins.level == 3 && c.kind != CueKind::Function) return "level-3 text must use a function cue";
      if (c.kind == CueKind::Name) return "level-4 text must use an attribute or spatial cue";
      const auto& spec = world.objects.find(ins.target);
      switch (c.kind) {
        case CueKind::Function:
          if (std::find(spec.function_tags.begin(), spec.function_tags.end(), c.value) == spec.function_tags.end() ||
              !contains_phrase(ins.text, c.value))
            return "function cue not present";
          break;
        case CueKind::Appearance:
          if (std::find(spec.appearance_tags.begin(), spec.appearance_tags.end(), c.value) ==
                  spec.appearance_tags.end() ||
              !contains_phrase(ins.text, c.value))
            return "appearance cue not present";
          break;
        case CueKind::SpatialObject:
          if (quadrant_from_phrase(lower(ins.text)) != c.relation || !contains_token(ins.text, c.anchor))
            return "spatial clause does not match its cue";
          break;
        case CueKind::SpatialRobot:
          if (!contains_token(ins.text, c.relation)) return "robot-relative cue not present";
          break;
        case CueKind::Name:
          break;
      }
      break;
    }
    default:
      return "level out of range";
  }
  if (scene && !cue_holds(world, *scene, target_index, ins.cue)) return "cue does not single out the target";
  return std::nullopt;
}

std::vector<Instruction> generate_corpus(const GenerationContext& ctx, int level, std::size_t count, std::uint64_t seed,
                                         const SceneOptions& opts) {
  InstructionPool pool;
  const std::size_t max_attempts = 200 * std::max<std::size_t>(count, 1);
  for (std::size_t i = 0; pool.size() < count; ++i) {
    if (i >= max_attempts) {
      throw GenerationError("level " + std::to_string(level) + ": only " + std::to_string(pool.size()) + " of " +
                            std::to_string(count) + " distinct instructions after " + std::to_string(i) + " attempts");
    }
    const std::uint64_t s = Rng::derive(seed, {static_cast<std::uint64_t>(level), i});
    try {
      const auto task = generate_scene(ctx.world, level, s, opts);
      pool.add(generate_instruction(ctx, level, task, pool, Rng::derive(s, {1})));
    } catch (const GenerationError&) {
      continue;  // new seed
    }
  }
  return pool.items();
}

std::size_t train_size(int level, std::size_t total) {
  if (level == 1) return total;
  const std::size_t num = kFullTrainCount[static_cast<std::size_t>(level - 1)];
  const std::size_t den = kFullCorpusSize[static_cast<std::size_t>(level - 1)];
  return (total * num + den / 2) / den;
}

SplitSpec build_splits(const std::vector<Instruction>& corpus, int level) {
  SplitSpec split;
  split.level = level;
  std::vector<std::string> ids;
  for (const auto& i : corpus)
    if (i.level == level) ids.push_back(i.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t minimum = level == 1 ? 1 : 2;
  if (ids.size() < minimum) {
    throw ConfigError("level " + std::to_string(level) + " has " + std::to_string(ids.size()) +
                      " instructions, need at least " + std::to_string(minimum));
  }
  if (level == 1) {
    split.train = ids;
    split.test = ids;
    return split;
  }
  std::stable_sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
    const auto ha = fnv1a64(a), hb = fnv1a64(b);
    return ha != hb ? ha < hb : a < b;
  });
  const std::size_t n_train = std::clamp<std::size_t>(train_size(level, ids.size()), 1, ids.size() - 1);
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return split;
}

std::vector<Instruction> select_ids(const std::vector<Instruction>& corpus, const std::vector<std::string>& ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Instruction> out;
  for (const auto& ins : corpus)
    if (wanted.count(ins.id)) out.push_back(ins);
  return out;
}

}  // namespace surfer::taskgen
