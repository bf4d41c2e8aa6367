#include "surfer/planner/demos.hpp"

#include <algorithm>
#include <deque>
#include <iomanip>
#include <sstream>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/common/rng.hpp"

namespace surfer::planner {

using nlohmann::ordered_json;

std::string planner_config_hash(const PlannerConfig& cfg) {
  const ordered_json j{{"step", cfg.step},
                       {"goal_bias", cfg.goal_bias},
                       {"max_iterations", cfg.max_iterations},
                       {"margin", cfg.margin},
                       {"seed", cfg.seed}};
  return hash_hex(j.dump());
}

std::string demo_config_hash(const DemoConfig& cfg) {
  const ordered_json j{{"count", cfg.count},
                       {"levels", cfg.levels},
                       {"seed", cfg.seed},
                       {"held_out_tables", cfg.held_out_tables},
                       {"planner", planner_config_hash(cfg.planner)},
                       {"distractors", cfg.distractors == taskgen::DistractorMode::Many ? "many" : "normal"},
                       {"yield_window", cfg.yield_window},
                       {"min_yield", cfg.min_yield}};
  return hash_hex(j.dump());
}

DemoResult generate_demos(const sim::World& world, const std::vector<taskgen::Instruction>& instructions,
                          const DemoConfig& cfg) {
  if (cfg.count == 0) throw ConfigError("demo count must be at least 1");
  if (cfg.levels.empty()) throw ConfigError("no levels requested");
  validate(cfg.planner);
  std::map<int, std::vector<const taskgen::Instruction*>> by_level;
  for (const auto& ins : instructions) by_level[ins.level].push_back(&ins);
  for (int level : cfg.levels) {
    if (by_level[level].empty()) throw ConfigError("no training instructions for level " + std::to_string(level));
  }

  taskgen::SceneOptions opts;
  opts.distractors = cfg.distractors;
  for (std::size_t t = 0; t < world.tables.size(); ++t) {
    if (std::find(cfg.held_out_tables.begin(), cfg.held_out_tables.end(), t) == cfg.held_out_tables.end()) {
      opts.tables.push_back(t);
    }
  }
  if (opts.tables.empty()) throw ConfigError("every table is held out");

  DemoResult result;
  std::deque<bool> window;
  std::size_t window_successes = 0;
  const std::size_t max_episodes = cfg.count * 20 + 100;
  for (std::uint64_t e = 0; result.kept.size() < cfg.count; ++e) {
    if (e >= max_episodes) throw PlanningError("demo generation exceeded its episode budget");
    const int level = cfg.levels[e % cfg.levels.size()];
    const auto& pool = by_level[level];
    Rng rng(Rng::derive(cfg.seed, {0xDE70, e}));
    const taskgen::Instruction& ins = *pool[rng.index(pool.size())];

    sim::TaskSpec task;
    bool have_scene = false;
    for (std::uint64_t retry = 0; retry < 8 && !have_scene; ++retry) {
      try {
        task = taskgen::generate_scene_for(world, ins, Rng::derive(cfg.seed, {0x5CE, e, retry}), opts);
        have_scene = true;
      } catch (const GenerationError&) {
      }
    }
    if (!have_scene) {
      ++result.failure_reasons["scene generation"];
      continue;
    }

    ++result.attempted;
    Trajectory traj;
    std::string reason;
    try {
      PlannerConfig pc = cfg.planner;
      pc.seed = Rng::derive(cfg.planner.seed, {cfg.seed, e});
      traj = run_expert(world, task, pc);
      if (!traj.success) reason = traj.length() >= kEpisodeCap ? "episode cap" : "script ended without success";
    } catch (const PlanningError& err) {
      reason = std::string("planning: ") + err.what();
      traj.task = task;
      traj.success = false;
    }
    std::ostringstream id;
    id << "ep" << std::setw(6) << std::setfill('0') << e;
    traj.episode_id = id.str();
    traj.instruction = ins;

    window.push_back(traj.success);
    window_successes += traj.success ? 1 : 0;
    if (window.size() > cfg.yield_window) {
      window_successes -= window.front() ? 1 : 0;
      window.pop_front();
    }
    if (traj.success) {
      result.kept.push_back(std::move(traj));
    } else {
      ++result.failure_reasons[std::string(sim::skill_name(task.skill)) + ": " + reason];
      if (cfg.keep_failures) result.failures.push_back(std::move(traj));
    }
    if (window.size() == cfg.yield_window &&
        static_cast<double>(window_successes) < cfg.min_yield * static_cast<double>(cfg.yield_window)) {
      std::ostringstream msg;
      msg << "expert yield " << window_successes << "/" << cfg.yield_window << " fell below "
          << cfg.min_yield * 100.0 << "%; failures:";
      for (const auto& [why, n] : result.failure_reasons) msg << " [" << why << " x" << n << "]";
      throw PlanningError(msg.str());
    }
  }
  return result;
}

nlohmann::ordered_json write_dataset(const sim::World& world, const DemoResult& result, const DemoConfig& cfg,
                                     const std::filesystem::path& out) {
  std::string body;
  std::map<std::string, std::size_t> per_level, per_skill;
  for (const auto& t : result.kept) {
    body += trajectory_to_json(world, t).dump();
    body += '\n';
    ++per_level[std::to_string(t.instruction.level)];
    ++per_skill[std::string(sim::skill_name(t.task.skill))];
  }
  write_file(out, body);
  ordered_json manifest;
  manifest["dataset"] = out.filename().string();
  manifest["dataset_hash"] = hash_hex(body);
  manifest["trajectories"] = result.kept.size();
  manifest["attempted"] = result.attempted;
  manifest["per_level"] = per_level;
  manifest["per_skill"] = per_skill;
  manifest["seed"] = cfg.seed;
  manifest["levels"] = cfg.levels;
  manifest["held_out_tables"] = cfg.held_out_tables;
  manifest["config_hash"] = demo_config_hash(cfg);
  manifest["planner_config_hash"] = planner_config_hash(cfg.planner);
  if (cfg.keep_failures) {
    std::string fail_body;
    for (const auto& t : result.failures) {
      fail_body += trajectory_to_json(world, t).dump();
      fail_body += '\n';
    }
    auto fail_path = out;
    fail_path += ".failures.jsonl";
    write_file(fail_path, fail_body);
    manifest["failures_file"] = fail_path.filename().string();
    manifest["failures"] = result.failures.size();
  }
  auto manifest_path = out;
  manifest_path += ".manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest;
}

std::vector<Trajectory> read_dataset(const sim::World& world, const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json(world, ordered_json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("dataset " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace surfer::planner
