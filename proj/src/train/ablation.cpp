#include "surfer/train/ablation.hpp"

#include <algorithm>
#include <cstdio>

#include "surfer/common/errors.hpp"
#include "surfer/train/report.hpp"

namespace surfer::train {

using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMseChunk = 64;

const LevelInstructions& find_level(const std::vector<LevelInstructions>& levels, int level) {
  const auto it = std::find_if(levels.begin(), levels.end(), [&](const LevelInstructions& li) { return li.level == level; });
  if (it == levels.end()) throw ConfigError("ablation needs level " + std::to_string(level) + " instructions");
  return *it;
}

model::ModelConfig variant_config(const model::ModelConfig& base, model::Variant v) {
  model::ModelConfig c = base;
  c.variant = v;
  if (v == model::Variant::NoSp) c.lambda = 0.0;
  return c;
}

std::string signed_points(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

double mean_rate(const VariantResult& v) {
  return build_report(v.episodes).rows.empty() ? 0.0 : build_report(v.episodes).rows.front().mean();
}

}  // namespace

double action_mse(const sim::World& world, const std::vector<planner::Trajectory>& data,
                  const tensor::ParamStore& params, const model::ModelConfig& cfg) {
  const auto index = sample_index(data);
  if (index.empty()) throw ConfigError("no steps to measure action error on");
  double sum = 0.0;
  for (std::size_t begin = 0; begin < index.size(); begin += kMseChunk) {
    const std::size_t end = std::min(index.size(), begin + kMseChunk);
    const std::vector<SampleRef> chunk(index.begin() + static_cast<std::ptrdiff_t>(begin),
                                       index.begin() + static_cast<std::ptrdiff_t>(end));
    model::ModelConfig action_only = cfg;
    action_only.lambda = 0.0;
    const model::Batch batch = build_batch(world, data, chunk, action_only);
    sum += model::loss_values(params, action_only, batch).action * static_cast<double>(chunk.size());
  }
  return sum / static_cast<double>(index.size());
}

std::string compare_shared_params(const tensor::ParamStore& no_sp, const tensor::ParamStore& full) {
  for (const auto& [name, value] : no_sp.entries()) {
    if (!full.contains(name)) return "parameter " + name + " missing from the full model";
    if (!(full.at(name) == value)) return "parameter " + name + " differs";
  }
  return {};
}

AblationResult ablate(const sim::World& world, const std::vector<planner::Trajectory>& data,
                      const std::vector<LevelInstructions>& levels, const AblationConfig& cfg,
                      const std::optional<std::filesystem::path>& checkpoint_dir) {
  if (cfg.variants.empty()) throw ConfigError("ablation needs at least one variant");
  if (cfg.validation_every < 2) throw ConfigError("validation cadence must be at least 2");
  cfg.eval.validate();
  if (cfg.eval.condition != Condition::Seen) throw ConfigError("ablation evaluates the seen condition");

  std::vector<planner::Trajectory> train_set, validation;
  for (std::size_t i = 0; i < data.size(); ++i)
    (i % cfg.validation_every == cfg.validation_every - 1 ? validation : train_set).push_back(data[i]);
  if (train_set.empty()) throw ConfigError("ablation dataset is empty");

  AblationResult result;
  result.train_trajectories = train_set.size();
  result.validation_trajectories = validation.size();

  std::optional<TrainResult> no_sp_run;
  for (model::Variant v : cfg.variants) {
    const model::ModelConfig mc = variant_config(cfg.model, v);
    std::optional<TrainOutputs> outputs;
    if (checkpoint_dir) {
      std::filesystem::create_directories(*checkpoint_dir);
      const std::string name(model::variant_name(v));
      outputs = TrainOutputs{*checkpoint_dir / (name + ".ckpt"), *checkpoint_dir / (name + ".loss.csv"),
                             ordered_json{{"variant", name}}, {}};
    }
    TrainResult run = train(world, train_set, mc, cfg.train, outputs);

    VariantResult vr;
    vr.variant = v;
    vr.parameters = run.params.scalar_count();
    vr.final_action_loss = run.curve.empty() ? 0.0 : run.curve.back().action;
    vr.heldout_action_mse = validation.empty() ? 0.0 : action_mse(world, validation, run.params, mc);
    const PolicyFn policy = model_policy(run.params, mc);
    for (int level : cfg.eval.levels) {
      auto logs = eval_level(world, policy, mc, std::string(model::variant_name(v)), find_level(levels, level), cfg.eval);
      vr.episodes.insert(vr.episodes.end(), std::make_move_iterator(logs.begin()), std::make_move_iterator(logs.end()));
    }
    result.variants.push_back(std::move(vr));
    if (v == model::Variant::NoSp) no_sp_run = std::move(run);
  }

  if (cfg.verify_no_sp && no_sp_run) {
    model::ModelConfig full_lambda0 = variant_config(cfg.model, model::Variant::Full);
    full_lambda0.lambda = 0.0;
    const TrainResult ref = train(world, train_set, full_lambda0, cfg.train, std::nullopt);
    std::string detail = compare_shared_params(no_sp_run->params, ref.params);
    if (detail.empty() && ref.curve.size() != no_sp_run->curve.size()) detail = "loss curves differ in length";
    for (std::size_t i = 0; detail.empty() && i < ref.curve.size(); ++i) {
      if (ref.curve[i].action != no_sp_run->curve[i].action || ref.curve[i].total != no_sp_run->curve[i].total) {
        detail = "loss curves differ at step " + std::to_string(ref.curve[i].step);
      }
    }
    result.no_sp_matches_lambda0 = detail.empty();
    result.no_sp_detail = detail.empty() ? "identical parameters and loss curves" : detail;
  }
  return result;
}

ordered_json ablation_summary(const AblationResult& r) {
  ordered_json variants = ordered_json::array();
  for (const VariantResult& v : r.variants) {
    variants.push_back({{"variant", model::variant_name(v.variant)},
                        {"parameters", v.parameters},
                        {"heldout_action_mse", v.heldout_action_mse},
                        {"final_action_loss", v.final_action_loss},
                        {"episodes", v.episodes.size()}});
  }
  ordered_json j{{"train_trajectories", r.train_trajectories},
                 {"validation_trajectories", r.validation_trajectories},
                 {"variants", variants}};
  if (r.no_sp_matches_lambda0) {
    j["no_sp_matches_lambda0"] = *r.no_sp_matches_lambda0;
    j["no_sp_detail"] = r.no_sp_detail;
  }
  return j;
}

AblationResult ablation_from_summary(const ordered_json& summary, const std::vector<EpisodeLog>& logs) {
  AblationResult r;
  try {
    r.train_trajectories = summary.at("train_trajectories").get<std::size_t>();
    r.validation_trajectories = summary.at("validation_trajectories").get<std::size_t>();
    for (const auto& v : summary.at("variants")) {
      VariantResult vr;
      vr.variant = model::parse_variant(v.at("variant").get<std::string>());
      vr.parameters = v.at("parameters").get<std::size_t>();
      vr.heldout_action_mse = v.at("heldout_action_mse").get<double>();
      vr.final_action_loss = v.at("final_action_loss").get<double>();
      const std::string name(model::variant_name(vr.variant));
      for (const auto& log : logs)
        if (log.label == name) vr.episodes.push_back(log);
      if (vr.episodes.size() != v.at("episodes").get<std::size_t>()) {
        throw ConfigError("episode logs for " + name + " do not match the summary");
      }
      r.variants.push_back(std::move(vr));
    }
    if (summary.contains("no_sp_matches_lambda0")) {
      r.no_sp_matches_lambda0 = summary.at("no_sp_matches_lambda0").get<bool>();
      r.no_sp_detail = summary.at("no_sp_detail").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ablation summary: ") + e.what());
  }
  return r;
}

std::string ablation_markdown(const AblationResult& r) {
  std::vector<int> levels;
  for (const auto& v : r.variants)
    for (const auto& log : v.episodes)
      if (std::find(levels.begin(), levels.end(), log.level) == levels.end()) levels.push_back(log.level);
  std::sort(levels.begin(), levels.end());

  std::string out = "## Ablation: success rate by level (%)\n\n| Variant |";
  std::string rule = "|---|";
  for (int l : levels) {
    out += " Level " + std::to_string(l) + " |";
    rule += "---:|";
  }
  out += " Mean | Parameters | Held-out action MSE |\n" + rule + "---:|---:|---:|\n";
  const VariantResult* full = nullptr;
  for (const auto& v : r.variants) {
    if (v.variant == model::Variant::Full) full = &v;
    const EvalReport rep = build_report(v.episodes);
    out += "| " + std::string(model::variant_name(v.variant)) + " |";
    for (int l : levels) {
      const bool has = !rep.rows.empty() && rep.rows.front().levels.count(l);
      out += " " + (has ? format_rate(rep.rows.front().levels.at(l).rate()) : std::string("-")) + " |";
    }
    char mse[32];
    std::snprintf(mse, sizeof mse, "%.6f", v.heldout_action_mse);
    out += " " + format_rate(mean_rate(v)) + " | " + std::to_string(v.parameters) + " | " + mse + " |\n";
  }

  out += "\n## Change in mean success against full (percentage points)\n\n| Variant | Local | Reference (reported, context only) |\n|---|---:|---:|\n";
  for (const auto& v : r.variants) {
    if (v.variant == model::Variant::Full) continue;
    const std::string local = full ? signed_points(mean_rate(v) - mean_rate(*full)) : std::string("-");
    std::string ref = "-";
    if (v.variant == model::Variant::NoSp) ref = signed_points(kReferenceNoSpDelta);
    if (v.variant == model::Variant::ConcatFusion) ref = signed_points(kReferenceConcatDelta);
    out += "| " + std::string(model::variant_name(v.variant)) + " | " + local + " | " + ref + " |\n";
  }
  if (full) {
    out += "\n## Parameter count relative to full\n\n| Variant | Ratio |\n|---|---:|\n";
    for (const auto& v : r.variants) {
      char ratio[32];
      std::snprintf(ratio, sizeof ratio, "%.4f", static_cast<double>(v.parameters) / static_cast<double>(full->parameters));
      out += "| " + std::string(model::variant_name(v.variant)) + " | " + ratio + " |\n";
    }
  }
  if (r.no_sp_matches_lambda0) {
    out += std::string("\nno-sp against full with lambda 0: ") + (*r.no_sp_matches_lambda0 ? "match" : "MISMATCH") +
           " (" + r.no_sp_detail + ")\n";
  }
  return out;
}

std::string ablation_csv(const AblationResult& r) {
  std::string out = "variant,level,episodes,successes,rate,parameters,heldout_action_mse\n";
  for (const auto& v : r.variants) {
    const EvalReport rep = build_report(v.episodes);
    char mse[32];
    std::snprintf(mse, sizeof mse, "%.9g", v.heldout_action_mse);
    const std::string name(model::variant_name(v.variant));
    if (!rep.rows.empty()) {
      for (const auto& [level, t] : rep.rows.front().levels) {
        out += name + "," + std::to_string(level) + "," + std::to_string(t.episodes) + "," + std::to_string(t.successes) +
               "," + format_rate(t.rate()) + "," + std::to_string(v.parameters) + "," + mse + "\n";
      }
    }
    out += name + ",mean,,," + format_rate(mean_rate(v)) + "," + std::to_string(v.parameters) + "," + mse + "\n";
  }
  return out;
}

}  // namespace surfer::train
