#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/sim/render.hpp"
#include "surfer/sim/serialize.hpp"
#include "surfer/sim/simulator.hpp"
#include "surfer/tensor/checkpoint.hpp"
#include "surfer/train/ablation.hpp"
#include "surfer/train/report.hpp"
#include "train_fixtures.hpp"

using namespace surfer;
using namespace surfer::train;
using surfer::test::world;

namespace {

const std::vector<LevelInstructions>& levels() {
  static const auto out = test::desk_levels(21);
  return out;
}

const std::vector<planner::Trajectory>& dataset() {
  static const auto out = test::demos(levels(), 12, 4);
  return out;
}

TrainConfig short_run(std::size_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.batch = 4;
  cfg.log_every = 2;
  cfg.warmup = 2;
  cfg.seed = 9;
  return cfg;
}

EpisodeLog run_one(const EpisodeSpec& spec, const PolicyFn& policy, std::size_t max_steps) {
  RolloutConfig rc;
  rc.model = test::tiny_model();
  rc.max_steps = max_steps;
  return rollout(world(), {spec}, policy, rc).front();
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.steps = 1000;
  cfg.warmup = 100;
  cfg.adam.lr = 2e-3;
  cfg.final_lr_fraction = 0.1;
  CHECK(learning_rate(cfg, 0) == doctest::Approx(2e-5));
  CHECK(learning_rate(cfg, 99) == doctest::Approx(2e-3));
  CHECK(learning_rate(cfg, 100) == doctest::Approx(2e-3));
  CHECK(learning_rate(cfg, 550) == doctest::Approx(1.1e-3));
  CHECK(learning_rate(cfg, 1000) == doctest::Approx(2e-4));
  cfg.schedule = Schedule::Constant;
  CHECK(learning_rate(cfg, 700) == 2e-3);

  TrainConfig bad;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.adam.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(train_config_from_json(to_json(short_run(7))).steps == 7);
}

TEST_CASE("training examples") {
  const auto& data = dataset();
  REQUIRE(data.size() == 12);
  const auto index = sample_index(data);
  std::size_t total = 0;
  for (const auto& t : data) total += t.length();
  CHECK(index.size() == total);

  const auto cfg = short_run(1);
  CHECK(batch_samples(index, cfg, 3).size() == cfg.batch);
  const auto first = batch_samples(index, cfg, 3), again = batch_samples(index, cfg, 3);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].trajectory == again[i].trajectory);
    CHECK(first[i].t == again[i].t);
  }

  const model::ModelConfig mc = test::tiny_model();
  const std::vector<SampleRef> picks{{0, 0}, {1, data[1].length() - 1}};
  const model::Batch b = build_batch(world(), data, picks, mc);
  CHECK(b.size == 2);
  CHECK(b.patches.rows() == 2 * mc.window() * mc.patches());
  CHECK(b.next_patches.rows() == 2 * mc.patches());
  for (std::size_t j = 0; j < 7; ++j) {
    CHECK(b.actions(0, j) == data[0].steps[0].action.to_array()[j]);
    CHECK(b.actions(1, j) == data[1].steps.back().action.to_array()[j]);
  }
  // The label frame of the last step is the final scene.
  const auto last = model::patchify(sim::render(world(), data[1].final_scene(), sim::View::Top), mc);
  for (std::size_t i = 0; i < last.size(); ++i) REQUIRE(b.next_patches[mc.patches() * 192 + i] == last[i]);
  CHECK_THROWS_AS(build_batch(world(), data, {{0, data[0].length()}}, mc), ConfigError);
}

TEST_CASE("first logged loss is the loss of the initial parameters") {
  const model::ModelConfig mc = test::tiny_model();
  const TrainConfig cfg = short_run(3);
  const TrainResult run = train::train(world(), dataset(), mc, cfg);
  REQUIRE(run.curve.size() == 2);
  CHECK(run.curve[0].step == 0);
  CHECK(run.curve[1].step == 2);
  CHECK(run.steps == 3);

  const auto initial = model::init_params(mc, cfg.seed);
  const auto batch = build_batch(world(), dataset(), batch_samples(sample_index(dataset()), cfg, 0), mc);
  const auto offline = model::loss_values(initial, mc, batch);
  CHECK(run.curve[0].action == offline.action);
  CHECK(run.curve[0].scene == offline.scene);
  CHECK(run.curve[0].total == offline.total);
  CHECK_FALSE(run.params == initial);
}

TEST_CASE("training is deterministic and writes its outputs") {
  const model::ModelConfig mc = test::tiny_model();
  TrainConfig cfg = short_run(5);
  cfg.checkpoint_every = 2;
  const auto dir = test::scratch_dir("surfer_train_outputs");
  TrainOutputs out{dir / "model.ckpt", dir / "loss.csv", {{"dataset_hash", "abc"}}};
  const TrainResult a = train::train(world(), dataset(), mc, cfg, out);
  const std::string curve = read_file(out.loss_curve);
  const std::string ckpt = read_file(out.checkpoint);
  const TrainResult b = train::train(world(), dataset(), mc, cfg, out);
  CHECK(a.params == b.params);
  CHECK(loss_curve_csv(a.curve) == loss_curve_csv(b.curve));
  CHECK(read_file(out.loss_curve) == curve);
  CHECK(read_file(out.checkpoint) == ckpt);
  CHECK(curve.rfind("step,l_act,l_scene,l_total\n0,", 0) == 0);

  const auto loaded = model::load_model(out.checkpoint);
  CHECK(loaded.card.at("dataset_hash") == "abc");
  CHECK(loaded.card.at("step") == 5);
  CHECK(loaded.card.at("complete") == true);
  CHECK(loaded.card.at("train").at("steps") == 5);
  CHECK(loaded.params == tensor::decode_checkpoint(tensor::encode_checkpoint(a.params)));

  TrainConfig other = cfg;
  other.seed = 10;
  CHECK_FALSE(train::train(world(), dataset(), mc, other).params == a.params);
  CHECK_THROWS_AS(train::train(world(), {}, mc, cfg), ConfigError);
}

TEST_CASE("non-finite loss aborts and keeps the last good checkpoint") {
  const model::ModelConfig mc = test::tiny_model();
  TrainConfig cfg = short_run(6);
  cfg.checkpoint_every = 2;
  // Huge labels overflow the squared error on the first batch.
  auto data = dataset();
  for (auto& t : data)
    for (auto& s : t.steps) s.action.dx = 1e200;
  const auto dir = test::scratch_dir("surfer_train_nan");
  TrainOutputs out{dir / "model.ckpt", dir / "loss.csv", {}};
  try {
    train::train(world(), data, mc, cfg, out);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
  const auto initial = tensor::decode_checkpoint(tensor::encode_checkpoint(model::init_params(mc, cfg.seed)));
  auto kept = model::load_model(out.checkpoint);
  CHECK(kept.card.at("step") == 0);
  CHECK(kept.card.at("complete") == false);
  CHECK(kept.params == initial);

  // A step size this large ruins the parameters after the first update; the
  // failure comes later and the step-0 checkpoint is still the one on disk.
  TrainConfig wild = cfg;
  wild.adam.lr = 1e300;
  wild.warmup = 0;
  wild.schedule = Schedule::Constant;
  wild.checkpoint_every = 1000;
  try {
    train::train(world(), dataset(), mc, wild, out);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 0") == std::string::npos);
  }
  kept = model::load_model(out.checkpoint);
  CHECK(kept.card.at("step") == 0);
  CHECK(kept.params == initial);
}

TEST_CASE("rollout terminates on success and replays") {
  const auto& traj = dataset().front();
  EpisodeSpec spec{"e0", traj.instruction, traj.task, 1.0};
  std::vector<sim::Action> actions;
  for (const auto& s : traj.steps) actions.push_back(s.action);
  actions.resize(actions.size() + 10, sim::Action{});

  // The expert's actions through the rollout machinery reproduce its result.
  const EpisodeLog log = run_one(spec, replay_policy({actions}), 120);
  CHECK(log.success == traj.success);
  CHECK(log.steps == traj.length());
  CHECK(log.steps < 120);
  CHECK(verify_episode(world(), log).empty());

  // Too few steps: stops at the cap without success.
  const EpisodeLog cut = run_one(spec, replay_policy({actions}), traj.length() - 1);
  CHECK_FALSE(cut.success);
  CHECK(cut.steps == traj.length() - 1);
  CHECK(verify_episode(world(), cut).empty());

  // Tampering is detected.
  EpisodeLog bad = log;
  bad.success = !bad.success;
  CHECK_FALSE(verify_episode(world(), bad).empty());
  bad = log;
  bad.actions.back() = sim::Action{};
  CHECK_FALSE(verify_episode(world(), bad).empty());

  // Actions are clamped before stepping.
  const EpisodeLog wild = run_one(spec, [](auto inputs, auto, std::size_t) {
    return std::vector<sim::Action>(inputs.size(), sim::Action{50, -50, 50, 9, 9, 9, 9});
  }, 5);
  for (const auto& a : wild.actions) CHECK(sim::within_bounds(a));

  // Episode logs round-trip through JSONL.
  const auto text = episodes_to_jsonl(world(), {log, cut});
  const auto back = episodes_from_jsonl(world(), text);
  REQUIRE(back.size() == 2);
  CHECK(episodes_to_jsonl(world(), back) == text);
  CHECK(back[0].actions == log.actions);
  CHECK_THROWS_AS(episodes_from_jsonl(world(), "{not json}\n"), ConfigError);
}

TEST_CASE("expert replay through rollout matches the planner across a dataset") {
  const auto& data = dataset();
  std::vector<EpisodeSpec> specs;
  std::vector<std::vector<sim::Action>> actions;
  for (const auto& t : data) {
    specs.push_back({t.episode_id, t.instruction, t.task, 1.0});
    actions.emplace_back();
    for (const auto& s : t.steps) actions.back().push_back(s.action);
  }
  RolloutConfig rc;
  rc.model = test::tiny_model();
  const auto logs = rollout(world(), specs, replay_policy(actions), rc);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(logs[i].success == data[i].success);
    CHECK(logs[i].steps == data[i].length());
  }
}

TEST_CASE("random-weights policy rarely picks") {
  // Level-1 pick episodes only.
  const LevelInstructions& l1 = levels()[0];
  LevelInstructions picks = l1;
  std::erase_if(picks.corpus, [](const taskgen::Instruction& i) { return i.skill != sim::Skill::Pick; });
  picks.split = taskgen::build_splits(picks.corpus, 1);
  EvalConfig cfg;
  cfg.levels = {1};
  cfg.episodes = 100;
  cfg.seed = 5;
  model::ModelConfig mc;
  mc.d = 32;
  const auto params = model::init_params(mc, 1);
  const auto logs = eval_level(world(), model_policy(params, mc), mc, "random-weights", picks, cfg);
  REQUIRE(logs.size() == 100);
  std::size_t wins = 0;
  for (const auto& l : logs) {
    CHECK(l.skill == "pick");
    wins += l.success ? 1 : 0;
  }
  CHECK(wins < 5);
}

TEST_CASE("evaluation isolation and episode sets") {
  EvalConfig cfg;
  cfg.episodes = 30;
  cfg.seed = 2;
  for (const auto& li : levels()) {
    const auto episodes = episode_set(world(), li, cfg);
    REQUIRE(episodes.size() == 30);
    const std::set<std::string> test(li.split.test.begin(), li.split.test.end());
    const std::set<std::string> train(li.split.train.begin(), li.split.train.end());
    for (const auto& e : episodes) {
      CHECK(test.count(e.instruction.id) == 1);
      if (li.level >= 2) CHECK(train.count(e.instruction.id) == 0);
      CHECK(e.instruction.level == li.level);
      CHECK(std::find(cfg.held_out_tables.begin(), cfg.held_out_tables.end(), e.task.initial.table_id) ==
            cfg.held_out_tables.end());
      CHECK(e.brightness == 1.0);
    }
  }
  // Same seed, same episodes.
  const auto a = episode_set(world(), levels()[2], cfg), b = episode_set(world(), levels()[2], cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(sim::scene_hash(world(), a[i].task.initial) == sim::scene_hash(world(), b[i].task.initial));

  // A split that leaks a training instruction into the test side is refused.
  LevelInstructions leaky = levels()[1];
  leaky.split.test.push_back(leaky.split.train.front());
  CHECK_THROWS_AS(test_instructions(leaky), ConfigError);
  LevelInstructions empty = levels()[3];
  empty.split.test.clear();
  CHECK_THROWS_AS(episode_set(world(), empty, cfg), ConfigError);
  CHECK_THROWS_AS(parse_condition("fog"), ConfigError);
}

TEST_CASE("robustness conditions") {
  EvalConfig cfg;
  cfg.episodes = 12;
  cfg.seed = 8;
  const model::ModelConfig mc = test::tiny_model();
  const PolicyFn policy = uniform_policy(1);

  cfg.condition = Condition::Distractors;
  for (const auto& e : episode_set(world(), levels()[2], cfg)) {
    CHECK(e.task.initial.objects.size() >= 4);
    CHECK(e.task.initial.objects.size() <= 6);
  }
  cfg.condition = Condition::ChangingLights;
  for (const auto& e : episode_set(world(), levels()[3], cfg)) {
    CHECK(e.brightness >= 0.5);
    CHECK(e.brightness <= 1.5);
  }
  cfg.condition = Condition::UnseenBackground;
  for (const auto& e : episode_set(world(), levels()[1], cfg)) {
    CHECK((e.task.initial.table_id == 8 || e.task.initial.table_id == 9));
  }
  CHECK_THROWS_AS(eval_robustness(world(), policy, mc, "p", levels(), cfg, {}), ConfigError);
  CHECK_THROWS_AS(eval_robustness(world(), policy, mc, "p", levels(), cfg, {8}), ConfigError);
  const auto unseen = eval_robustness(world(), policy, mc, "p", levels(), cfg, {8, 9});
  CHECK(unseen.size() == 36);

  // Seen robustness equals the mean of the seen level rows for 2-4.
  cfg.condition = Condition::Seen;
  const auto seen = eval_robustness(world(), policy, mc, "p", levels(), cfg, {8, 9});
  std::vector<EpisodeLog> rows;
  double sum = 0.0;
  for (int level : {2, 3, 4}) {
    const auto logs = eval_level(world(), policy, mc, "p", levels()[static_cast<std::size_t>(level - 1)], cfg);
    std::size_t wins = 0;
    for (const auto& l : logs) wins += l.success ? 1 : 0;
    sum += 100.0 * static_cast<double>(wins) / static_cast<double>(logs.size());
    rows.insert(rows.end(), logs.begin(), logs.end());
  }
  CHECK(episodes_to_jsonl(world(), rows) == episodes_to_jsonl(world(), seen));
  const EvalReport rep = build_report(seen);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].mean() == doctest::Approx(sum / 3.0).epsilon(1e-15));
}

TEST_CASE("reports") {
  EvalConfig cfg;
  cfg.episodes = 10;
  cfg.seed = 3;
  const model::ModelConfig mc = test::tiny_model();
  std::vector<EpisodeLog> logs;
  for (const auto& li : levels()) {
    auto l = eval_level(world(), uniform_policy(4), mc, "uniform", li, cfg);
    logs.insert(logs.end(), l.begin(), l.end());
  }
  cfg.condition = Condition::ChangingLights;
  auto lights = eval_robustness(world(), uniform_policy(4), mc, "uniform", levels(), cfg, {8, 9});
  logs.insert(logs.end(), lights.begin(), lights.end());

  const EvalReport rep = build_report(logs);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.levels == std::vector<int>{1, 2, 3, 4});
  const ReportRow& seen = rep.rows[0];
  CHECK(seen.condition == "seen");
  double sum = 0.0;
  for (const auto& [level, t] : seen.levels) {
    CHECK(t.episodes == 10);
    CHECK(t.rate() == 100.0 * static_cast<double>(t.successes) / 10.0);
    sum += t.rate();
  }
  CHECK(seen.mean() == sum / 4.0);

  const std::string md = report_markdown(rep);
  CHECK(md.find("| Model | Condition | Level 1 | Level 2 | Level 3 | Level 4 | Mean |") != std::string::npos);
  CHECK(md.find("| 74.74 | 61.05 | 45.26 | 37.89 | 54.74 |") != std::string::npos);
  CHECK(md.find("| Seen | Unseen backgrounds | Changing lights | Distractors |") != std::string::npos);
  CHECK(md.find("| 48.07 | 46.67 | 45.83 | 40.83 |") != std::string::npos);

  // Regenerated from the serialized logs, in any order, byte for byte.
  auto shuffled = episodes_from_jsonl(world(), episodes_to_jsonl(world(), logs));
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(report_markdown(build_report(shuffled)) == md);
  CHECK(report_csv(build_report(shuffled)) == report_csv(rep));
  CHECK(report_csv(rep).rfind("label,condition,level,episodes,successes,rate\n", 0) == 0);

  for (const auto& l : logs) REQUIRE(verify_episode(world(), l).empty());
}

TEST_CASE("ablation harness") {
  AblationConfig cfg;
  cfg.model = test::tiny_model();
  cfg.train = short_run(4);
  cfg.eval.episodes = 3;
  cfg.eval.seed = 6;
  cfg.validation_every = 4;
  const auto result = ablate(world(), dataset(), levels(), cfg);
  REQUIRE(result.variants.size() == 4);
  CHECK(result.validation_trajectories == 3);
  CHECK(result.train_trajectories == 9);
  REQUIRE(result.no_sp_matches_lambda0.has_value());
  CHECK(*result.no_sp_matches_lambda0);
  const std::size_t full = result.variants[0].parameters;
  for (const auto& v : result.variants) {
    CHECK(v.episodes.size() == 12);
    CHECK(std::isfinite(v.heldout_action_mse));
    CHECK(static_cast<double>(v.parameters) > 0.0);
    if (v.variant == model::Variant::ConcatFusion) {
      CHECK(std::abs(static_cast<double>(v.parameters) / static_cast<double>(full) - 1.0) <= 0.10);
    }
  }
  const std::string md = ablation_markdown(result);
  for (const char* name : {"| full |", "| no-sp |", "| concat-fusion |", "| instr-sp |"}) CHECK(md.find(name) != std::string::npos);
  CHECK(md.find("-6.05") != std::string::npos);
  CHECK(md.find("-3.95") != std::string::npos);
  CHECK(md.find("no-sp against full with lambda 0: match") != std::string::npos);

  std::vector<EpisodeLog> logs;
  for (const auto& v : result.variants) logs.insert(logs.end(), v.episodes.begin(), v.episodes.end());
  const auto again = ablation_from_summary(ablation_summary(result), episodes_from_jsonl(world(), episodes_to_jsonl(world(), logs)));
  CHECK(ablation_markdown(again) == md);
  CHECK(ablation_csv(again) == ablation_csv(result));

  // Shared-parameter comparison sees a single flipped bit.
  auto a = model::init_params(cfg.model, 1);
  auto b = a;
  CHECK(compare_shared_params(a, b).empty());
  b.at("ap.head.2.b")[0] = std::nextafter(b.at("ap.head.2.b")[0], 1.0);
  CHECK_FALSE(compare_shared_params(a, b).empty());
}
