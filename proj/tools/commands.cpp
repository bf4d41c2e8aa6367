#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "run_support.hpp"
#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/train/report.hpp"

namespace surfer::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// A flag that feeds one config key.
struct Binding {
  CLI::Option* option = nullptr;
  std::string section, key;
  std::vector<std::string>* values = nullptr;
  bool* flag = nullptr;
};

class Bindings {
 public:
  void value(CLI::App* app, const std::string& name, const std::string& section, const std::string& key,
             const std::string& help) {
    auto& store = storage_.emplace_back();
    items_.push_back({app->add_option(name, store, help), section, key, &store, nullptr});
  }
  void flag(CLI::App* app, const std::string& name, const std::string& section, const std::string& key,
            const std::string& help) {
    auto& store = flags_.emplace_back(false);
    items_.push_back({app->add_flag(name, store, help), section, key, nullptr, &store});
  }
  // Overrides for the flags given on the command line, in declaration order.
  std::vector<Override> overrides() const {
    std::vector<Override> out;
    for (const Binding& b : items_) {
      if (b.option->count() == 0) continue;
      if (b.flag) {
        out.push_back({b.section, b.key, *b.flag ? "true" : "false"});
        continue;
      }
      std::string joined;
      for (const auto& v : *b.values) joined += (joined.empty() ? "" : ",") + v;
      out.push_back({b.section, b.key, joined});
    }
    return out;
  }

 private:
  std::deque<std::vector<std::string>> storage_;
  std::deque<bool> flags_;
  std::vector<Binding> items_;
};

struct Common {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::string out;
};

// Library, table and lexicon files that every command reads.
std::vector<fs::path> data_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

template <class... Lists>
std::vector<fs::path> concat(const std::vector<fs::path>& first, const Lists&... rest) {
  std::vector<fs::path> out = first;
  (out.insert(out.end(), rest.begin(), rest.end()), ...);
  return out;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

// Instruction files grouped into one corpus and split per level.
std::vector<train::LevelInstructions> load_levels(const std::vector<fs::path>& files) {
  if (files.empty()) throw ConfigError("no instruction files given (--instructions)");
  std::map<int, std::vector<taskgen::Instruction>> by_level;
  std::set<std::pair<int, std::string>> ids;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ConfigError("instruction file " + f.string() + " does not exist");
    for (auto& ins : taskgen::read_jsonl(read_file(f))) {
      if (!ids.insert({ins.level, ins.id}).second) {
        throw ConfigError("level-" + std::to_string(ins.level) + " instruction " + ins.id + " appears twice");
      }
      by_level[ins.level].push_back(std::move(ins));
    }
  }
  std::vector<train::LevelInstructions> out;
  for (auto& [level, corpus] : by_level) out.push_back(train::level_instructions(level, std::move(corpus)));
  return out;
}

const train::LevelInstructions& level_of(const std::vector<train::LevelInstructions>& levels, int level) {
  for (const auto& li : levels)
    if (li.level == level) return li;
  throw ConfigError("no instructions for level " + std::to_string(level));
}

struct Session {
  RunConfig cfg;
  fs::path root;
  std::unique_ptr<RootLock> lock;
  sim::World world;
};

Session open_session(const Common& common, const std::vector<Override>& flags) {
  std::vector<Override> overrides;
  for (const auto& s : common.sets) overrides.push_back(parse_override(s));
  overrides.insert(overrides.end(), flags.begin(), flags.end());
  std::optional<fs::path> file;
  if (common.config) file = *common.config;
  Session s;
  s.cfg = load_run_config(file, overrides, SURFER_DATA_DIR);
  s.root = s.cfg.paths.out_root;
  s.world = sim::World::load(s.cfg.paths.data_dir);
  return s;
}

// Takes the lock and writes the manifest for `output` before any work starts.
void begin(Session& s, std::string_view command, const fs::path& output, const std::vector<fs::path>& inputs,
           const ordered_json& extra = ordered_json::object()) {
  for (const auto& in : inputs) check_not_input(output, {in});
  s.lock = std::make_unique<RootLock>(s.root);
  const auto manifest = run_manifest(command, s.cfg.snapshot(), inputs, extra);
  fs::create_directories(output.parent_path());
  write_file(manifest_path(output), manifest.dump(2) + "\n");
}

std::string rate_line(const std::string& label, const std::vector<train::EpisodeLog>& logs) {
  std::size_t wins = 0;
  for (const auto& l : logs) wins += l.success ? 1 : 0;
  return label + ": " + std::to_string(wins) + "/" + std::to_string(logs.size()) + " (" +
         train::format_rate(logs.empty() ? 0.0 : 100.0 * static_cast<double>(wins) / static_cast<double>(logs.size())) +
         "%)";
}

int cmd_gen_instructions(const Common& common, const Bindings& b) {
  Session s = open_session(common, b.overrides());
  const RunConfig& c = s.cfg;
  const fs::path out = output_path(s.root, common.out);
  begin(s, "gen-instructions", out, data_files(c.paths.data_dir));

  const taskgen::Lexicon lex = taskgen::Lexicon::load(c.paths.data_dir);
  std::unique_ptr<taskgen::LlmClient> client;
  const auto mode = taskgen::parse_generation_mode(c.instructions.mode);
  if (mode == taskgen::GenerationMode::Llm) {
    if (!c.llm.fixture.empty()) {
      client = std::make_unique<taskgen::ReplayLlmClient>(c.llm.fixture);
    } else if (!c.llm.url.empty()) {
      const char* token = std::getenv("SURFER_LLM_TOKEN");
      client = std::make_unique<taskgen::HttpLlmClient>(c.llm.url, token ? token : "", c.llm.timeout_seconds);
    } else {
      client = taskgen::HttpLlmClient::from_environment();
    }
  }
  std::vector<std::string> events;
  taskgen::GenerationContext ctx{s.world, lex, mode, client.get(), &events, c.instructions.llm_attempts};
  const int level = c.instructions.level;
  const std::size_t count = c.instructions.count ? c.instructions.count : taskgen::kDeskCorpusSize[level - 1];
  const auto corpus = taskgen::generate_corpus(ctx, level, count, c.seed);
  for (const auto& e : events) warn(e);
  write_file(out, taskgen::to_jsonl(corpus));
  info("wrote " + std::to_string(corpus.size()) + " level-" + std::to_string(level) + " instructions to " +
       out.string());
  return kExitOk;
}

int cmd_gen_demos(const Common& common, const Bindings& b) {
  Session s = open_session(common, b.overrides());
  const RunConfig& c = s.cfg;
  const fs::path out = output_path(s.root, common.out);
  const ordered_json extra{{"demo_config_hash", planner::demo_config_hash(c.demos)},
                           {"planner_config_hash", planner::planner_config_hash(c.demos.planner)}};
  begin(s, "gen-demos", out, concat(data_files(c.paths.data_dir), c.paths.instructions), extra);

  const auto levels = load_levels(c.paths.instructions);
  std::vector<taskgen::Instruction> pool;
  for (int level : c.demos.levels) {
    const auto& li = level_of(levels, level);
    const auto train = taskgen::select_ids(li.corpus, li.split.train);
    pool.insert(pool.end(), train.begin(), train.end());
  }
  const planner::DemoResult result = planner::generate_demos(s.world, pool, c.demos);
  planner::write_dataset(s.world, result, c.demos, out);
  info("kept " + std::to_string(result.kept.size()) + " of " + std::to_string(result.attempted) +
       " attempted demonstrations; wrote " + out.string());
  for (const auto& [reason, n] : result.failure_reasons) info("  failed (" + reason + "): " + std::to_string(n));
  return kExitOk;
}

int cmd_train(const Common& common, const Bindings& b) {
  Session s = open_session(common, b.overrides());
  const RunConfig& c = s.cfg;
  if (c.paths.dataset.empty()) throw ConfigError("no dataset given (--data)");
  const fs::path out = output_path(s.root, common.out);
  const fs::path data_manifest = with_suffix(c.paths.dataset, ".manifest.json");
  std::vector<fs::path> inputs = concat(data_files(c.paths.data_dir), std::vector<fs::path>{c.paths.dataset});
  if (fs::exists(data_manifest)) inputs.push_back(data_manifest);
  begin(s, "train", out, inputs);

  ordered_json meta;
  meta["dataset"] = c.paths.dataset.filename().string();
  meta["dataset_hash"] = file_hash_hex(c.paths.dataset);
  // Tables kept out of the training data; unseen-background evaluation needs them.
  meta["held_out_tables"] = ordered_json::array();
  if (fs::exists(data_manifest)) {
    const auto m = ordered_json::parse(read_file(data_manifest));
    if (m.contains("held_out_tables")) meta["held_out_tables"] = m["held_out_tables"];
  }
  const auto data = planner::read_dataset(s.world, c.paths.dataset);
  info("training on " + std::to_string(data.size()) + " trajectories for " + std::to_string(c.train.steps) + " steps");

  train::TrainOutputs outputs{out, with_suffix(out, ".loss.csv"), meta, {}};
  outputs.progress = [](const train::LossRow& r) {
    char line[128];
    std::snprintf(line, sizeof line, "step %zu  l_act %.6g  l_scene %.6g  l_total %.6g", r.step, r.action, r.scene,
                  r.total);
    info(line);
  };
  const auto result = train::train(s.world, data, c.model, c.train, outputs);
  info("wrote " + out.string() + " after " + std::to_string(result.steps) + " steps");
  return kExitOk;
}

struct EvalOptions {
  std::string policy = "model";
  std::string label;
};

int cmd_eval(const Common& common, const Bindings& b, const EvalOptions& opt) {
  Session s = open_session(common, b.overrides());
  const RunConfig& c = s.cfg;
  const fs::path out = output_path(s.root, common.out);
  std::vector<fs::path> inputs = concat(data_files(c.paths.data_dir), c.paths.instructions);
  if (!c.paths.checkpoint.empty()) inputs.push_back(c.paths.checkpoint);
  begin(s, "eval", out, inputs, {{"policy", opt.policy}});

  const auto levels = load_levels(c.paths.instructions);
  std::optional<model::LoadedModel> loaded;
  if (!c.paths.checkpoint.empty()) loaded = model::load_model(c.paths.checkpoint);
  if (opt.policy == "model" && !loaded) throw ConfigError("model policy needs a checkpoint (--ckpt)");

  const model::ModelConfig mc = loaded ? loaded->config : c.model;
  tensor::ParamStore params;
  train::PolicyFn policy;
  if (opt.policy == "model") {
    params = loaded->params;
    policy = train::model_policy(params, mc);
  } else if (opt.policy == "random-weights") {
    // Untrained network with the initialisation the checkpoint started from.
    std::uint64_t seed = c.seed;
    if (loaded && loaded->card.contains("train")) seed = loaded->card["train"].value("seed", seed);
    params = model::init_params(mc, seed);
    policy = train::model_policy(params, mc);
  } else if (opt.policy == "uniform") {
    policy = train::uniform_policy(c.seed);
  } else {
    throw ConfigError("unknown policy '" + opt.policy + "' (model, random-weights, uniform)");
  }
  const std::string label = opt.label.empty() ? opt.policy : opt.label;

  std::vector<train::EpisodeLog> logs;
  if (c.eval.condition == train::Condition::Seen) {
    for (int level : c.eval.levels) {
      auto l = train::eval_level(s.world, policy, mc, label, level_of(levels, level), c.eval);
      info(rate_line("level " + std::to_string(level), l));
      logs.insert(logs.end(), l.begin(), l.end());
    }
  } else {
    std::vector<std::size_t> reserved;
    if (loaded && loaded->card.contains("held_out_tables")) {
      reserved = loaded->card["held_out_tables"].get<std::vector<std::size_t>>();
    }
    logs = train::eval_robustness(s.world, policy, mc, label, levels, c.eval, reserved);
    info(rate_line(std::string(train::condition_name(c.eval.condition)), logs));
  }
  const auto report = train::build_report(logs);
  write_file(with_suffix(out, ".jsonl"), train::episodes_to_jsonl(s.world, logs));
  write_file(with_suffix(out, ".md"), train::report_markdown(report));
  write_file(with_suffix(out, ".csv"), train::report_csv(report));
  std::cout << train::report_markdown(report);
  return kExitOk;
}

int cmd_ablate(const Common& common, const Bindings& b) {
  Session s = open_session(common, b.overrides());
  const RunConfig& c = s.cfg;
  if (c.paths.dataset.empty()) throw ConfigError("no dataset given (--data)");
  const fs::path out = output_path(s.root, common.out);
  begin(s, "ablate", out,
        concat(data_files(c.paths.data_dir), c.paths.instructions, std::vector<fs::path>{c.paths.dataset}));

  const auto levels = load_levels(c.paths.instructions);
  const auto data = planner::read_dataset(s.world, c.paths.dataset);
  const auto result = train::ablate(s.world, data, levels, c.ablation, with_suffix(out, ".checkpoints"));
  std::vector<train::EpisodeLog> logs;
  for (const auto& v : result.variants) logs.insert(logs.end(), v.episodes.begin(), v.episodes.end());
  write_file(with_suffix(out, ".summary.json"), train::ablation_summary(result).dump(2) + "\n");
  write_file(with_suffix(out, ".jsonl"), train::episodes_to_jsonl(s.world, logs));
  write_file(with_suffix(out, ".md"), train::ablation_markdown(result));
  write_file(with_suffix(out, ".csv"), train::ablation_csv(result));
  std::cout << train::ablation_markdown(result);
  if (result.no_sp_matches_lambda0 && !*result.no_sp_matches_lambda0) {
    warn("no-sp differs from full with lambda 0: " + result.no_sp_detail);
  }
  return kExitOk;
}

int cmd_report(const Common& common, const std::vector<std::string>& log_files, const std::string& ablation) {
  Session s = open_session(common, {});
  const fs::path out = output_path(s.root, common.out);
  std::vector<fs::path> inputs(log_files.begin(), log_files.end());
  if (!ablation.empty()) inputs.emplace_back(ablation);
  begin(s, "report", out, inputs);

  std::vector<train::EpisodeLog> logs;
  for (const auto& f : log_files) {
    auto l = train::episodes_from_jsonl(s.world, read_file(f));
    logs.insert(logs.end(), l.begin(), l.end());
  }
  std::string md, csv;
  if (!ablation.empty()) {
    const auto result = train::ablation_from_summary(ordered_json::parse(read_file(ablation)), logs);
    md = train::ablation_markdown(result);
    csv = train::ablation_csv(result);
  } else {
    const auto report = train::build_report(logs);
    md = train::report_markdown(report);
    csv = train::report_csv(report);
  }
  write_file(with_suffix(out, ".md"), md);
  write_file(with_suffix(out, ".csv"), csv);
  std::cout << md;
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Language-conditioned manipulation with a scene-predicting world model", "surfer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  Bindings b;
  app.add_option("--config", common.config, "key/value config file with [sections]");
  app.add_option("--set", common.sets, "override one config value: section.key=value (repeatable)");
  b.value(&app, "--out-root", "paths", "out_root", "directory that receives every output");
  b.value(&app, "--data-dir", "paths", "data_dir", "object, table and lexicon files");
  b.value(&app, "--seed", "run", "seed", "seed for every stage");

  auto* gen_ins = app.add_subcommand("gen-instructions", "generate one level's instruction corpus");
  b.value(gen_ins, "--level", "instructions", "level", "instruction level 1-4");
  b.value(gen_ins, "--count", "instructions", "count", "number of instructions (default: desk size)");
  b.value(gen_ins, "--mode", "instructions", "mode", "template or llm");
  gen_ins->add_option("--out", common.out, "output JSONL file")->required();

  auto* gen_demos = app.add_subcommand("gen-demos", "run the scripted expert to build a demonstration dataset");
  b.value(gen_demos, "--count", "demos", "count", "kept trajectories wanted");
  b.value(gen_demos, "--levels", "demos", "levels", "instruction levels, e.g. 1,2");
  b.value(gen_demos, "--instructions", "paths", "instructions", "instruction JSONL files");
  b.flag(gen_demos, "--keep-failures", "demos", "keep_failures", "also write failed attempts");
  gen_demos->add_option("--out", common.out, "output dataset file")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  b.value(train_cmd, "--data", "paths", "dataset", "dataset file");
  b.value(train_cmd, "--steps", "train", "steps", "optimizer steps");
  b.value(train_cmd, "--lr", "train", "lr", "peak learning rate");
  b.value(train_cmd, "--variant", "model", "variant", "full, no-sp, concat-fusion or instr-sp");
  train_cmd->add_option("--out", common.out, "checkpoint file")->required();

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("eval", "closed-loop evaluation");
  b.value(eval_cmd, "--ckpt", "paths", "checkpoint", "checkpoint file");
  b.value(eval_cmd, "--levels", "eval", "levels", "levels to evaluate, e.g. 1,2,3,4");
  b.value(eval_cmd, "--condition", "eval", "condition", "seen, unseen-background, changing-lights or distractors");
  b.value(eval_cmd, "--episodes", "eval", "episodes", "episodes per level");
  b.value(eval_cmd, "--instructions", "paths", "instructions", "instruction JSONL files");
  eval_cmd->add_option("--policy", eval_opt.policy, "model, random-weights or uniform")->capture_default_str();
  eval_cmd->add_option("--label", eval_opt.label, "row label in the report (default: policy name)");
  eval_cmd->add_option("--out", common.out, "output prefix (.jsonl, .md, .csv)")->capture_default_str();

  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate model variants");
  b.value(ablate_cmd, "--variants", "ablation", "variants", "variants to compare");
  b.value(ablate_cmd, "--data", "paths", "dataset", "dataset file");
  b.value(ablate_cmd, "--instructions", "paths", "instructions", "instruction JSONL files");
  b.value(ablate_cmd, "--steps", "train", "steps", "optimizer steps per variant");
  b.value(ablate_cmd, "--episodes", "eval", "episodes", "episodes per level");
  ablate_cmd->add_option("--out", common.out, "output prefix")->capture_default_str();

  std::vector<std::string> log_files;
  std::string ablation_summary;
  auto* report_cmd = app.add_subcommand("report", "rebuild report tables from episode logs");
  report_cmd->add_option("--logs", log_files, "episode JSONL files")->required()->delimiter(',');
  report_cmd->add_option("--ablation", ablation_summary, "ablation summary JSON");
  report_cmd->add_option("--out", common.out, "output prefix (.md, .csv)")->capture_default_str();

  common.out = "";
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen_ins->parsed()) return cmd_gen_instructions(common, b);
    if (gen_demos->parsed()) return cmd_gen_demos(common, b);
    if (train_cmd->parsed()) return cmd_train(common, b);
    if (eval_cmd->parsed()) {
      if (common.out.empty()) common.out = "eval";
      return cmd_eval(common, b, eval_opt);
    }
    if (ablate_cmd->parsed()) {
      if (common.out.empty()) common.out = "ablation";
      return cmd_ablate(common, b);
    }
    if (report_cmd->parsed()) {
      if (common.out.empty()) common.out = "report";
      return cmd_report(common, log_files, ablation_summary);
    }
  } catch (const std::exception& e) {
    error(e.what());
    return exit_code_for(e);
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace surfer::cli
