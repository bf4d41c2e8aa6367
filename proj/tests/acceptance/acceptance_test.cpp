// Acceptance suite: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; with none, all nine run.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "model_fixtures.hpp"
#include "planner_checks.hpp"
#include "random_graph.hpp"
#include "sim_fixtures.hpp"
#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/planner/demos.hpp"
#include "surfer/sim/simulator.hpp"
#include "surfer/taskgen/generator.hpp"
#include "surfer/train/ablation.hpp"
#include "surfer/train/report.hpp"

using namespace surfer;
namespace fs = std::filesystem;
using test::world;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

const taskgen::Lexicon& lexicon() {
  static const taskgen::Lexicon lex = taskgen::Lexicon::load(SURFER_DATA_DIR);
  return lex;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "surfer_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Desk-size corpora and splits for levels 1-4.
const std::vector<train::LevelInstructions>& desk_levels() {
  static const auto out = [] {
    std::vector<train::LevelInstructions> levels;
    for (int level = 1; level <= 4; ++level) {
      auto corpus = taskgen::generate_corpus({world(), lexicon()}, level, taskgen::kDeskCorpusSize[level - 1], 1);
      levels.push_back(train::level_instructions(level, std::move(corpus)));
    }
    return levels;
  }();
  return out;
}

planner::DemoConfig desk_demo_config() {
  planner::DemoConfig cfg;
  cfg.count = 2000;
  cfg.levels = {1, 2};
  cfg.seed = 17;
  return cfg;
}

std::vector<taskgen::Instruction> training_pool() {
  std::vector<taskgen::Instruction> out;
  for (int level : {1, 2}) {
    const auto& li = desk_levels()[static_cast<std::size_t>(level - 1)];
    const auto ids = taskgen::select_ids(li.corpus, li.split.train);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

// The 2000-demonstration level-1/2 dataset and its generation time.
struct DeskData {
  planner::DemoResult result;
  double cpu = 0.0;
};

const DeskData& desk_data() {
  static const DeskData out = [] {
    DeskData d;
    const double t0 = cpu_seconds();
    d.result = planner::generate_demos(world(), training_pool(), desk_demo_config());
    d.cpu = cpu_seconds() - t0;
    return d;
  }();
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const double t0 = cpu_seconds();
  int graphs_ok = 0;
  double worst_graph = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    surfer::testing::GraphGenerator gen(seed);
    const auto r = surfer::testing::check_graph(gen.generate(), 1e-5);
    worst_graph = std::max(worst_graph, r.max_rel_error);
    if (r.max_rel_error < 1e-4) ++graphs_ok;
  }

  model::ModelConfig cfg = test::gradcheck_config();
  const auto groups = test::model_gradcheck(cfg, 2, 21, 1e-5);
  std::size_t groups_ok = 0;
  double worst_model = 0.0;
  for (const auto& [name, e] : groups) {
    worst_model = std::max(worst_model, e.worst);
    if (e.worst < 1e-4 && e.entries > 0) ++groups_ok;
  }
  const double cpu = cpu_seconds() - t0;
  const bool all_groups = groups.size() == model::param_names(cfg).size() && groups_ok == groups.size();
  return {graphs_ok == 100 && all_groups && cpu < 120.0,
          std::to_string(graphs_ok) + "/100 graphs (worst " + fmt("%.2e", worst_graph) + "), " +
              std::to_string(groups_ok) + "/" + std::to_string(groups.size()) + " parameter groups (d=16, L=2, k=1, " +
              "batch 2; worst " + fmt("%.2e", worst_model) + "), " + fmt("%.1f", cpu) + " s CPU (limit 120)"};
}

// Success conditions at threshold +- eps, stated independently of the
// evaluator: each case lists the final-state edit and the expected verdict.
Outcome evaluator_exactness() {
  using sim::Skill;
  const double eps = 1e-6;
  const sim::SceneState init = test::scene_with(
      {test::place("Cola", 0, 30), test::place("Mug", 25, 30), test::place("Cabinet", -20, 45)});
  struct Case {
    std::string name;
    Skill skill;
    std::size_t target;
    std::optional<std::size_t> secondary;
    std::function<void(sim::SceneState&)> edit;
    bool expect;
  };
  auto grasp_at = [](double z) {
    return [z](sim::SceneState& s) {
      s.attached = 0;
      s.objects[0].state.grasped = true;
      s.objects[0].state.z = z;
    };
  };
  auto hinge = [](double deg) { return [deg](sim::SceneState& s) { s.objects[2].state.hinge_deg = deg; }; };
  auto shift = [](double dx, double dy) {
    return [dx, dy](sim::SceneState& s) {
      s.objects[0].state.x += dx;
      s.objects[0].state.y += dy;
    };
  };
  // Cola ends `gap` from the Mug, having moved from (0, 30).
  auto near_mug = [](double gap) {
    return [gap](sim::SceneState& s) {
      s.objects[0].state.x = 25.0 - gap;
      s.objects[0].state.y = 30.0;
    };
  };
  std::vector<Case> cases = {
      {"pick 10 cm + eps", Skill::Pick, 0, {}, grasp_at(10.0 + eps), true},
      {"pick 10 cm", Skill::Pick, 0, {}, grasp_at(10.0), true},
      {"pick 10 cm - eps", Skill::Pick, 0, {}, grasp_at(10.0 - eps), false},
      {"pick 10.1 cm", Skill::Pick, 0, {}, grasp_at(10.1), true},
      {"pick 9.9 cm", Skill::Pick, 0, {}, grasp_at(9.9), false},
      {"pick high but released", Skill::Pick, 0, {},
       [](sim::SceneState& s) { s.objects[0].state.z = 12.0; }, false},
      {"open 80 deg + eps", Skill::OpenDoor, 2, {}, hinge(80.0 + eps), true},
      {"open 80 deg", Skill::OpenDoor, 2, {}, hinge(80.0), false},
      {"open 81 deg", Skill::OpenDoor, 2, {}, hinge(81.0), true},
      {"close 10 deg - eps", Skill::CloseDoor, 2, {}, hinge(10.0 - eps), true},
      {"close 10 deg", Skill::CloseDoor, 2, {}, hinge(10.0), false},
      {"push front 10 cm", Skill::PushFront, 0, {}, shift(0.0, 10.0), true},
      {"push front 10 cm - eps", Skill::PushFront, 0, {}, shift(0.0, 10.0 - eps), false},
      {"push front drift 5 cm - eps", Skill::PushFront, 0, {}, shift(5.0 - eps, 12.0), true},
      {"push front drift 5 cm", Skill::PushFront, 0, {}, shift(5.0, 12.0), false},
      {"push front backwards", Skill::PushFront, 0, {}, shift(0.0, -12.0), false},
      {"push left 10 cm", Skill::PushAside, 0, {}, shift(-10.0, 0.0), true},
      {"push right 10 cm", Skill::PushAside, 0, {}, shift(10.0, 0.0), true},
      {"push left 10 cm - eps", Skill::PushAside, 0, {}, shift(-(10.0 - eps), 0.0), false},
      {"push right 10 cm - eps", Skill::PushAside, 0, {}, shift(10.0 - eps, 0.0), false},
      {"push aside drift 5 cm - eps", Skill::PushAside, 0, {}, shift(12.0, 5.0 - eps), true},
      {"push aside drift 5 cm", Skill::PushAside, 0, {}, shift(12.0, -5.0), false},
      {"near 10 cm - eps", Skill::MoveNear, 0, 1, near_mug(10.0 - eps), true},
      {"near 10 cm", Skill::MoveNear, 0, 1, near_mug(10.0), false},
      {"near but unmoved", Skill::MoveNear, 0, 1,
       [](sim::SceneState& s) { s.objects[1].state.x = 5.0; }, false},
      {"near moved 1 cm", Skill::MoveNear, 0, 1,
       [](sim::SceneState& s) {
         s.objects[1].state.x = 4.0;
         s.objects[0].state.x = 1.0;
       },
       false},
      {"near moved 1 cm + eps", Skill::MoveNear, 0, 1,
       [eps](sim::SceneState& s) {
         s.objects[1].state.x = 4.0;
         s.objects[0].state.x = 1.0 + eps;
       },
       true},
      {"knock upright", Skill::KnockOver, 0, {}, [](sim::SceneState&) {}, false},
      {"knock fallen", Skill::KnockOver, 0, {}, [](sim::SceneState& s) { s.objects[0].state.upright = false; }, true},
      {"knock fallen while held", Skill::KnockOver, 0, {},
       [](sim::SceneState& s) {
         s.objects[0].state.upright = false;
         s.objects[0].state.grasped = true;
         s.attached = 0;
       },
       false},
      {"place upright on table", Skill::Place, 0, {}, [](sim::SceneState&) {}, true},
      {"place fallen", Skill::Place, 0, {}, [](sim::SceneState& s) { s.objects[0].state.upright = false; }, false},
      {"place still held", Skill::Place, 0, {},
       [](sim::SceneState& s) {
         s.objects[0].state.grasped = true;
         s.attached = 0;
       },
       false},
      {"place above table", Skill::Place, 0, {}, [eps](sim::SceneState& s) { s.objects[0].state.z = eps; }, false},
  };
  int ok = 0;
  std::string failed;
  for (const auto& c : cases) {
    sim::SceneState final_state = init;
    c.edit(final_state);
    const sim::TaskSpec task{c.skill, c.target, c.secondary, init};
    if (sim::evaluate_success(world(), task, final_state) == c.expect) {
      ++ok;
    } else {
      failed += " [" + c.name + "]";
    }
  }
  // A skill that cannot apply to its target is a task error, not a verdict.
  bool rejects = false;
  try {
    (void)sim::evaluate_success(world(), sim::TaskSpec{sim::Skill::OpenDoor, 0, std::nullopt, init}, init);
  } catch (const TaskDefinitionError&) {
    rejects = true;
  }
  const int total = static_cast<int>(cases.size());
  return {ok == total && rejects, std::to_string(ok) + "/" + std::to_string(total) +
                                      " threshold cases, mismatched skill rejected: " + (rejects ? "yes" : "no") + failed};
}

// Quadrant of b seen from a by testing each closed/open half-plane pair.
std::string oracle_quadrant(double ax, double ay, double bx, double by) {
  const std::array<std::pair<const char*, std::pair<bool, bool>>, 4> regions = {
      {{"LF", {true, true}}, {"LB", {true, false}}, {"RF", {false, true}}, {"RB", {false, false}}}};
  std::string hit;
  int hits = 0;
  for (const auto& [code, side] : regions) {
    const bool in_x = side.first ? !(bx > ax) : bx > ax;   // left includes the tie
    const bool in_y = side.second ? !(by < ay) : by < ay;  // front includes the tie
    if (in_x && in_y) {
      hit = code;
      ++hits;
    }
  }
  return hits == 1 ? hit : "??";
}

// Euclidean distance rounded to the nearest hundredth, choosing between the
// two candidate hundredths in extended precision.
double oracle_distance(double ax, double ay, double bx, double by) {
  const long double dx = static_cast<long double>(bx) - ax, dy = static_cast<long double>(by) - ay;
  const long double d = std::sqrt(dx * dx + dy * dy);
  const long double lo = std::floor(d * 100.0L);
  const long double pick = (d - lo / 100.0L) < ((lo + 1.0L) / 100.0L - d) ? lo : lo + 1.0L;
  return static_cast<double>(pick) / 100.0;
}

Outcome relation_oracle() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-35.0, 35.0);
  int match = 0, anti = 0, anti_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    sim::ObjectState a, b;
    a.x = u(gen);
    a.y = u(gen) + 35.0;
    b.x = u(gen);
    b.y = u(gen) + 35.0;
    if (i % 10 == 0) b.x = a.x;  // exercise the tie rules
    if (i % 15 == 0) b.y = a.y;
    const sim::Relation r = sim::spatial_relation(a, b);
    if (r.rela == oracle_quadrant(a.x, a.y, b.x, b.y) && r.dist == oracle_distance(a.x, a.y, b.x, b.y)) ++match;
    if (a.x != b.x && a.y != b.y) {
      ++anti_cases;
      const sim::Relation back = sim::spatial_relation(b, a);
      static const std::map<std::string, std::string> opposite = {
          {"LF", "RB"}, {"RB", "LF"}, {"LB", "RF"}, {"RF", "LB"}};
      if (back.rela == opposite.at(r.rela) && back.dist == r.dist) ++anti;
    }
  }
  sim::ObjectState milk, tea;
  tea.x = -10.0;
  tea.y = 20.0;
  const sim::Relation worked = sim::spatial_relation(milk, tea);
  const bool example = worked.rela == "LF" && worked.dist == 22.36;
  return {match == 1000 && anti == anti_cases && example,
          std::to_string(match) + "/1000 pairs match the oracle, antisymmetry " + std::to_string(anti) + "/" +
              std::to_string(anti_cases) + ", worked example {" + worked.rela + ", " + fmt("%.2f", worked.dist) + "}"};
}

Outcome planner_competence() {
  const auto paths = test::check_random_paths(world(), 500, 99);
  const auto expert = test::check_expert_level1(world(), 200, 7);
  const auto& demos = desk_data().result;
  const double yield = static_cast<double>(demos.kept.size()) / static_cast<double>(demos.attempted);
  const double expert_rate = static_cast<double>(expert.successes) / expert.episodes;
  return {paths.planned == 500 && paths.clean == 500 && expert_rate >= 0.95 && yield >= 0.5,
          std::to_string(paths.clean) + "/" + std::to_string(paths.planned) +
              " paths clear at 0.1 cm resolution, expert " + std::to_string(expert.successes) + "/" +
              std::to_string(expert.episodes) + " on level-1 pick/push/knock, demo yield " +
              std::to_string(demos.kept.size()) + "/" + std::to_string(demos.attempted) + " (" +
              fmt("%.1f", 100.0 * yield) + "%)"};
}

Outcome dataset_integrity() {
  const auto dir = scratch("dataset");
  const auto cfg = desk_demo_config();
  const auto a = planner::generate_demos(world(), training_pool(), cfg);
  const auto b = planner::generate_demos(world(), training_pool(), cfg);
  planner::write_dataset(world(), a, cfg, dir / "a.jsonl");
  planner::write_dataset(world(), b, cfg, dir / "b.jsonl");
  const bool identical = read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl");

  const auto stored = planner::read_dataset(world(), dir / "a.jsonl");
  std::size_t replayed = 0;
  for (const auto& t : stored)
    if (t.success && planner::verify_replay(world(), t).empty()) ++replayed;

  // Full-scale corpora for levels 2-4.
  const std::array<std::pair<std::size_t, std::size_t>, 3> expected = {{{160, 80}, {686, 172}, {2041, 226}}};
  std::string sizes;
  bool splits_ok = true;
  for (int level = 2; level <= 4; ++level) {
    const auto corpus =
        taskgen::generate_corpus({world(), lexicon()}, level, taskgen::kFullCorpusSize[level - 1], 5);
    const auto split = taskgen::build_splits(corpus, level);
    const std::set<std::string> train(split.train.begin(), split.train.end());
    std::size_t overlap = 0;
    for (const auto& id : split.test) overlap += train.count(id);
    const auto& [tr, te] = expected[static_cast<std::size_t>(level - 2)];
    splits_ok = splits_ok && corpus.size() == taskgen::kFullCorpusSize[level - 1] && split.train.size() == tr &&
                split.test.size() == te && overlap == 0;
    sizes += " L" + std::to_string(level) + " " + std::to_string(split.train.size()) + "/" +
             std::to_string(split.test.size()) + (overlap ? " OVERLAP" : "");
  }
  for (int level = 2; level <= 4; ++level) {
    const auto& li = desk_levels()[static_cast<std::size_t>(level - 1)];
    const std::set<std::string> train(li.split.train.begin(), li.split.train.end());
    for (const auto& id : li.split.test) splits_ok = splits_ok && train.count(id) == 0;
  }
  return {identical && replayed == stored.size() && !stored.empty() && splits_ok,
          std::string("two runs byte-identical: ") + (identical ? "yes" : "no") + ", " + std::to_string(replayed) +
              "/" + std::to_string(stored.size()) + " trajectories replay, full-scale splits (train/test):" + sizes};
}

Outcome instruction_constraints() {
  static const std::map<std::string, std::string> phrase = {
      {"LF", "left-front"}, {"LB", "left-back"}, {"RF", "right-front"}, {"RB", "right-back"}};
  int bad_l1 = 0, bad_name = 0, spatial = 0, spatial_ok = 0, extremes = 0, extremes_ok = 0;
  std::map<int, int> made;
  for (int level = 1; level <= 4; ++level) {
    for (std::uint64_t seed = 0; made[level] < 500; ++seed) {
      sim::TaskSpec task;
      taskgen::Instruction ins;
      try {
        task = taskgen::generate_scene(world(), level, Rng::derive(31, {static_cast<std::uint64_t>(level), seed}));
        ins = taskgen::template_instruction(world(), lexicon(), level, task, seed);
      } catch (const GenerationError&) {
        continue;
      }
      ++made[level];
      const auto tokens = taskgen::tokenize(ins.text);
      const std::string target = world().spec(task.initial.objects[task.target]).name;
      if (level == 1) {
        const auto& verbs = lexicon().verbs_for(task.skill);
        const bool verb = tokens.size() == 2 && std::find(verbs.begin(), verbs.end(), tokens[0]) != verbs.end();
        if (!verb || ins.text != tokens[0] + " " + target) ++bad_l1;
      }
      if (level >= 3) {
        std::string lower = target;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (std::find(tokens.begin(), tokens.end(), lower) != tokens.end()) ++bad_name;
      }
      if (level != 4) continue;
      const auto& objs = task.initial.objects;
      const auto& t = objs[task.target].state;
      if (ins.cue.kind == taskgen::CueKind::SpatialObject) {
        ++spatial;
        std::optional<std::size_t> anchor;
        for (std::size_t j = 0; j < objs.size(); ++j)
          if (j != task.target && world().spec(objs[j]).name == ins.cue.anchor) anchor = j;
        if (!anchor) continue;
        const auto& a = objs[*anchor].state;
        const std::string truth = oracle_quadrant(a.x, a.y, t.x, t.y);
        int phrases = 0;
        bool agrees = false;
        for (const auto& [code, words] : phrase) {
          if (ins.text.find(words) == std::string::npos) continue;
          ++phrases;
          agrees = code == truth;
        }
        if (phrases == 1 && agrees) ++spatial_ok;
      } else if (ins.cue.kind == taskgen::CueKind::SpatialRobot) {
        ++extremes;
        const std::string& which = ins.cue.relation;
        bool holds = ins.text.find(which) != std::string::npos;
        for (std::size_t j = 0; j < objs.size(); ++j) {
          if (j == task.target) continue;
          const auto& o = objs[j].state;
          if (which == "leftmost") holds = holds && t.x < o.x;
          if (which == "rightmost") holds = holds && t.x > o.x;
          if (which == "nearest") holds = holds && std::hypot(t.x, t.y) < std::hypot(o.x, o.y);
          if (which == "farthest") holds = holds && std::hypot(t.x, t.y) > std::hypot(o.x, o.y);
        }
        if (holds) ++extremes_ok;
      }
    }
  }
  return {bad_l1 == 0 && bad_name == 0 && spatial > 0 && spatial_ok == spatial && extremes_ok == extremes,
          "500 per level; level 1 off-pattern " + std::to_string(bad_l1) + ", levels 3-4 naming the target " +
              std::to_string(bad_name) + ", level-4 quadrant clauses agreeing " + std::to_string(spatial_ok) + "/" +
              std::to_string(spatial) + ", robot-frame extremes agreeing " + std::to_string(extremes_ok) + "/" +
              std::to_string(extremes)};
}

std::size_t successes(const std::vector<train::EpisodeLog>& logs) {
  std::size_t n = 0;
  for (const auto& l : logs) n += l.success ? 1 : 0;
  return n;
}

Outcome learning_signal() {
  const auto& data = desk_data().result.kept;

  // Overfit: 10 trajectories, 2000 steps, action MSE over every step.
  std::vector<planner::Trajectory> ten(data.begin(), data.begin() + 10);
  model::ModelConfig small;
  small.d = 32;
  small.layers = 2;
  train::TrainConfig fit;
  fit.steps = 2000;
  fit.adam.lr = 3e-3;
  fit.final_lr_fraction = 0.01;
  fit.seed = 3;
  const double f0 = cpu_seconds();
  const auto fitted = train::train(world(), ten, small, fit);
  const double fit_cpu = cpu_seconds() - f0;
  const double fit_mse = train::action_mse(world(), ten, fitted.params, small);
  const bool overfit = fit_mse < 1e-3 && fit_cpu < 300.0;

  // Desk run: 2000 demonstrations, 20000 steps.
  model::ModelConfig desk;
  desk.d = 32;
  desk.layers = 4;
  train::TrainConfig run;
  run.steps = 20000;
  run.adam.lr = 2e-3;
  run.seed = 5;
  const double d0 = cpu_seconds();
  const auto trained = train::train(world(), data, desk, run);
  const double desk_cpu = cpu_seconds() - d0 + desk_data().cpu;

  train::EvalConfig ec;
  ec.levels = {1};
  ec.episodes = 100;
  ec.seed = 41;
  const auto& l1 = desk_levels()[0];
  const auto trained_logs = train::eval_level(world(), train::model_policy(trained.params, desk), desk, "trained", l1, ec);
  const auto random_logs = train::eval_level(world(), train::uniform_policy(run.seed), desk, "random", l1, ec);
  const auto init = model::init_params(desk, run.seed);
  const auto init_logs = train::eval_level(world(), train::model_policy(init, desk), desk, "untrained", l1, ec);
  const std::size_t won = successes(trained_logs), base = successes(random_logs);
  const bool signal = won > 0 && won >= 5 * base && desk_cpu < 3600.0;

  auto logs = trained_logs;
  logs.insert(logs.end(), random_logs.begin(), random_logs.end());
  logs.insert(logs.end(), init_logs.begin(), init_logs.end());
  const auto out = scratch("learning");
  write_file(out / "level1.md", train::report_markdown(train::build_report(logs)));
  write_file(out / "level1.jsonl", train::episodes_to_jsonl(world(), logs));

  return {overfit && signal,
          "overfit L_act " + fmt("%.2e", fit_mse) + " in " + fmt("%.0f", fit_cpu) + " s CPU (limits 1e-3, 300 s); desk " +
              std::to_string(data.size()) + " demos, " + std::to_string(trained.steps) + " steps in " +
              fmt("%.0f", desk_cpu) + " s CPU (limit 3600), level-1 success trained " + std::to_string(won) +
              "/100 vs random policy " + std::to_string(base) + "/100 (needs >= 5x), untrained network " +
              std::to_string(successes(init_logs)) + "/100; per-skill table in " + (out / "level1.md").string()};
}

Outcome ablation_harness() {
  const auto& all = desk_data().result.kept;
  const std::vector<planner::Trajectory> data(all.begin(), all.begin() + 200);
  train::AblationConfig cfg;
  cfg.model.d = 16;
  cfg.model.layers = 2;
  cfg.model.k = 1;
  cfg.train.steps = 300;
  cfg.train.seed = 8;
  cfg.eval.episodes = 10;
  cfg.eval.seed = 12;
  const auto dir = scratch("ablation");
  const auto result = train::ablate(world(), data, desk_levels(), cfg, dir / "checkpoints");
  const std::string md = train::ablation_markdown(result);
  write_file(dir / "ablation.md", md);

  // Table shape: one row per variant with four level cells.
  bool shape = result.variants.size() == 4;
  for (const char* name : {"full", "no-sp", "concat-fusion", "instr-sp"}) {
    const auto row = md.find(std::string("| ") + name + " |");
    if (row == std::string::npos) {
      shape = false;
      continue;
    }
    const std::string line = md.substr(row, md.find('\n', row) - row);
    shape = shape && std::count(line.begin(), line.end(), '|') == 9;
  }
  for (const auto& v : result.variants) {
    std::set<int> levels;
    for (const auto& e : v.episodes) levels.insert(e.level);
    shape = shape && levels == std::set<int>{1, 2, 3, 4};
  }

  // Matched seeds: every variant saw the same episodes and trained from the same seed.
  bool matched = true;
  for (const auto& v : result.variants) {
    matched = matched && v.episodes.size() == result.variants[0].episodes.size();
    for (std::size_t i = 0; matched && i < v.episodes.size(); ++i)
      matched = v.episodes[i].scene_hash == result.variants[0].episodes[i].scene_hash &&
                v.episodes[i].instruction_id == result.variants[0].episodes[i].instruction_id;
    const auto card = model::load_model(dir / "checkpoints" / (std::string(model::variant_name(v.variant)) + ".ckpt")).card;
    matched = matched && card.at("train").at("seed") == cfg.train.seed;
  }

  const double full = static_cast<double>(result.variants[0].parameters);
  std::string ratios;
  bool params = true;
  for (const auto& v : result.variants) {
    const double ratio = static_cast<double>(v.parameters) / full;
    ratios += " " + std::string(model::variant_name(v.variant)) + " " + fmt("%.3f", ratio);
    if (v.variant == model::Variant::ConcatFusion || v.variant == model::Variant::InstrSp)
      params = params && std::abs(ratio - 1.0) <= 0.10;
  }
  const bool no_sp = result.no_sp_matches_lambda0.value_or(false);
  const bool deltas = md.find("| no-sp | ") != std::string::npos && md.find("-6.05") != std::string::npos &&
                      md.find("-3.95") != std::string::npos;
  return {shape && matched && params && no_sp && deltas,
          std::string("4x4 table: ") + (shape ? "yes" : "no") + ", matched seeds and episodes: " +
              (matched ? "yes" : "no") + ", parameter ratios to full:" + ratios +
              ", no-sp bit-identical to lambda 0: " + (no_sp ? "yes" : "no (" + result.no_sp_detail + ")") +
              ", reference deltas beside local: " + (deltas ? "yes" : "no") + "; table in " +
              (dir / "ablation.md").string()};
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

// gen -> train -> eval through the command-line tool in a fresh root; returns
// the hash of the report files, or an empty string on failure.
std::string pipeline(const fs::path& root) {
  write_file(root / "run.cfg",
             "seed = 23\n[model]\nd = 16\nlayers = 1\nscene_layers = 1\nk = 1\n"
             "[train]\nsteps = 150\nlog_every = 50\n[eval]\nepisodes = 10\n");
  const std::string cli = std::string(SURFER_CLI) + " --config " + (root / "run.cfg").string() + " --out-root " +
                          root.string() + " ";
  const std::string quiet = " > " + (root / "log.txt").string() + " 2>&1";
  std::string files;
  for (int level = 1; level <= 4; ++level) {
    const std::string f = "ins" + std::to_string(level) + ".jsonl";
    if (shell(cli + "gen-instructions --level " + std::to_string(level) + " --out " + f + quiet) != 0) return {};
    files += (files.empty() ? "" : ",") + (root / f).string();
  }
  if (shell(cli + "gen-demos --count 60 --levels 1,2 --instructions " + files.substr(0, files.find(',', files.find(',') + 1)) +
            " --out demos.jsonl" + quiet) != 0)
    return {};
  if (shell(cli + "train --data " + (root / "demos.jsonl").string() + " --out model.ckpt" + quiet) != 0) return {};
  if (shell(cli + "eval --ckpt " + (root / "model.ckpt").string() + " --levels 1,2,3,4 --instructions " + files +
            " --out eval" + quiet) != 0)
    return {};
  return hash_hex(read_file(root / "eval.md") + read_file(root / "eval.csv") + read_file(root / "eval.jsonl"));
}

Outcome end_to_end_determinism() {
  const auto a = pipeline(scratch("run_a"));
  const auto b = pipeline(scratch("run_b"));
  return {!a.empty() && a == b, "report hash run 1 " + (a.empty() ? std::string("(failed)") : a) + ", run 2 " +
                                    (b.empty() ? std::string("(failed)") : b)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"success-evaluator exactness", evaluator_exactness},
      {"spatial-relation oracle equivalence", relation_oracle},
      {"planner soundness and expert competence", planner_competence},
      {"dataset integrity", dataset_integrity},
      {"instruction-level constraints", instruction_constraints},
      {"learning signal", learning_signal},
      {"ablation harness", ablation_harness},
      {"end-to-end determinism", end_to_end_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s  %s  [%.0f s]\n", number, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
