#include "surfer/model/surfer.hpp"

#include <algorithm>
#include <cmath>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/common/rng.hpp"
#include "surfer/tensor/checkpoint.hpp"
#include "surfer/tensor/ops.hpp"

namespace surfer::model {

using tensor::Tensor;
using tensor::Var;
namespace ops = tensor;

namespace {

enum class Init { Weight, Zero, One, Embed, Token };

struct ParamSpec {
  std::string name;
  std::size_t rows, cols;
  Init init;
};

void add_linear(std::vector<ParamSpec>& out, const std::string& p, std::size_t in, std::size_t o) {
  out.push_back({p + ".w", in, o, Init::Weight});
  out.push_back({p + ".b", 1, o, Init::Zero});
}

void add_norm(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
  out.push_back({p + ".g", 1, d, Init::One});
  out.push_back({p + ".b", 1, d, Init::Zero});
}

void add_attention(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
  for (const char* m : {".q", ".k", ".v", ".o"}) add_linear(out, p + m, d, d);
}

void add_layer(std::vector<ParamSpec>& out, const std::string& p, std::size_t d, std::size_t ffn, bool cross) {
  add_norm(out, p + ".ln1", d);
  add_attention(out, p + ".self", d);
  if (cross) {
    add_norm(out, p + ".ln2", d);
    add_attention(out, p + ".cross", d);
  }
  add_norm(out, p + ".ln3", d);
  add_linear(out, p + ".ffn.1", d, ffn);
  add_linear(out, p + ".ffn.2", ffn, d);
}

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const std::size_t d = c.d, T = c.tokens_per_frame, W = c.window();
  std::vector<ParamSpec> out;
  add_linear(out, "img.proj", c.patch_dim(), d);
  out.push_back({"img.pos", c.patches(), d, Init::Token});
  add_linear(out, "img.tl", d, T);
  out.push_back({"ins.embed", c.vocab, d, Init::Embed});
  add_linear(out, "ins.proj", d, d);
  add_linear(out, "state.l1", c.state_features(), d);
  add_linear(out, "state.l2", d, d);
  out.push_back({"ap.time", W, d, Init::Token});
  const bool fused = c.variant == Variant::ConcatFusion;
  if (!fused) add_norm(out, "ap.kv_ln", d);
  for (std::size_t i = 0; i < c.layers; ++i) {
    add_layer(out, "ap.L" + std::to_string(i), d, fused ? c.fused_ffn() : c.ffn_mult * d, !fused);
  }
  add_norm(out, "ap.out_ln", d);
  add_linear(out, "ap.head.1", d, d);
  add_linear(out, "ap.head.2", d, 7);
  if (c.has_scene_module()) {
    out.push_back({"sp.mask", T, d, Init::Token});
    out.push_back({"sp.time", W, d, Init::Token});
    add_norm(out, "sp.kv_ln", d);
    for (std::size_t i = 0; i < c.scene_layers; ++i) add_layer(out, "sp.L" + std::to_string(i), d, c.ffn_mult * d, true);
    add_norm(out, "sp.out_ln", d);
    add_linear(out, "sp.out", d, d);
    if (c.variant != Variant::InstrSp) {
      add_linear(out, "sp.act.1", 7, d);
      add_linear(out, "sp.act.2", d, d);
    }
  }
  return out;
}

Tensor draw(const ParamSpec& s, std::uint64_t seed) {
  Tensor t(s.rows, s.cols);
  Rng rng(Rng::derive(seed, {fnv1a64(s.name)}));
  double stddev = 0.0;
  switch (s.init) {
    case Init::Zero: return t;
    case Init::One: return Tensor(s.rows, s.cols, 1.0);
    case Init::Weight: stddev = 1.0 / std::sqrt(static_cast<double>(s.rows)); break;
    case Init::Embed: stddev = 1.0; break;
    case Init::Token: stddev = 0.1; break;
  }
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

// Row index vector repeating 0..period-1 every `block` rows.
std::vector<std::size_t> tiled_index(std::size_t rows, std::size_t block, std::size_t period) {
  std::vector<std::size_t> idx(rows);
  for (std::size_t r = 0; r < rows; ++r) idx[r] = (r / block) % period;
  return idx;
}

template <typename F>
auto in_branch(const char* branch, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string(branch) + " branch: " + e.what());
  }
}

tensor::Tape& checked(const ModelConfig& cfg, const tensor::ParamStore& params, tensor::Tape& tape);

}  // namespace

tensor::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  tensor::ParamStore store;
  for (const auto& s : param_specs(cfg)) store.add(s.name, draw(s, seed));
  return store;
}

std::vector<std::string> param_names(const ModelConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : param_specs(cfg)) out.push_back(s.name);
  std::sort(out.begin(), out.end());
  return out;
}

void check_params(const tensor::ParamStore& params, const ModelConfig& cfg) {
  const auto specs = param_specs(cfg);
  if (specs.size() != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(params.size()) + " tensors, config expects " +
                      std::to_string(specs.size()));
  }
  for (const auto& s : specs) {
    if (!params.contains(s.name)) throw ConfigError("checkpoint lacks parameter " + s.name);
    const Tensor& t = params.at(s.name);
    if (t.rows() != s.rows || t.cols() != s.cols) {
      throw ConfigError("parameter " + s.name + " has shape " + t.shape_string() + ", expected " +
                        tensor::shape_string(s.rows, s.cols));
    }
  }
}

namespace {

tensor::Tape& checked(const ModelConfig& cfg, const tensor::ParamStore& params, tensor::Tape& tape) {
  cfg.validate();
  check_params(params, cfg);
  return tape;
}

}  // namespace

SurferNet::SurferNet(const ModelConfig& cfg, tensor::Tape& tape, const tensor::ParamStore& params)
    : cfg_(cfg), tape_(tape), params_(checked(cfg, params, tape), params) {}

Var SurferNet::ln(const std::string& p, Var x) const { return ops::layer_norm(x, params_[p + ".g"], params_[p + ".b"]); }

Var SurferNet::mlp(const std::string& p, Var x) const {
  const Var h = ops::gelu(ops::linear(x, params_[p + ".1.w"], params_[p + ".1.b"]));
  return ops::linear(h, params_[p + ".2.w"], params_[p + ".2.b"]);
}

Var SurferNet::attend(const std::string& p, Var q_in, Var kv_in, std::size_t groups) const {
  const Var q = ops::linear(q_in, params_[p + ".q.w"], params_[p + ".q.b"]);
  const Var k = ops::linear(kv_in, params_[p + ".k.w"], params_[p + ".k.b"]);
  const Var v = ops::linear(kv_in, params_[p + ".v.w"], params_[p + ".v.b"]);
  const Var a = ops::attention(q, k, v, groups, cfg_.heads);
  return ops::linear(a, params_[p + ".o.w"], params_[p + ".o.b"]);
}

// Pre-norm decoder layer: self-attention, cross-attention (when kv is given), feed-forward.
Var SurferNet::decoder_layer(const std::string& p, Var x, const Var* kv, std::size_t groups) const {
  Var h = ln(p + ".ln1", x);
  x = ops::add(x, attend(p + ".self", h, h, groups));
  if (kv) {
    h = ln(p + ".ln2", x);
    x = ops::add(x, attend(p + ".cross", h, *kv, groups));
  }
  h = ln(p + ".ln3", x);
  return ops::add(x, mlp(p + ".ffn", h));
}

Var SurferNet::encode_images(const Tensor& patches) const {
  const std::size_t P = cfg_.patches();
  if (patches.cols() != cfg_.patch_dim() || patches.rows() == 0 || patches.rows() % P != 0) {
    throw ShapeError("image patches " + patches.shape_string() + " are not whole 49x192 frames");
  }
  const Var x = tape_.constant(patches);
  Var tokens = ops::linear(x, params_["img.proj.w"], params_["img.proj.b"]);
  tokens = ops::add(tokens, ops::gather_rows(params_["img.pos"], tiled_index(patches.rows(), 1, P)));
  // Learned spatial attention: each of the T maps is a softmax over the frame's 49 positions.
  const Var logits = ops::linear(tokens, params_["img.tl.w"], params_["img.tl.b"]);
  const Var maps = ops::segment_softmax(logits, P);
  return ops::segment_matmul_tn(maps, tokens, P);
}

Var SurferNet::encode_instructions(const std::vector<std::vector<std::size_t>>& tokens) const {
  if (tokens.empty()) throw ShapeError("no instructions to encode");
  std::vector<std::size_t> ids, lengths;
  for (const auto& t : tokens) {
    if (t.empty()) throw ConfigError("instruction has no tokens");
    for (std::size_t id : t) {
      if (id >= cfg_.vocab) throw ShapeError("token id outside the vocabulary");
    }
    // Mean pooling is order-free; a canonical order makes it bitwise so.
    std::vector<std::size_t> sorted = t;
    std::sort(sorted.begin(), sorted.end());
    ids.insert(ids.end(), sorted.begin(), sorted.end());
    lengths.push_back(t.size());
  }
  const Var pooled = ops::segment_mean(ops::gather_rows(params_["ins.embed"], std::move(ids)), std::move(lengths));
  return ops::linear(pooled, params_["ins.proj.w"], params_["ins.proj.b"]);
}

Var SurferNet::encode_states(const Tensor& states) const {
  if (states.cols() != 7 || states.rows() == 0) throw ShapeError("states must be [n x 7], got " + states.shape_string());
  if (!states.all_finite()) throw NumericError("robot state has a non-finite entry");
  const Var x = tape_.constant(state_features(states, cfg_));
  const Var h = ops::gelu(ops::linear(x, params_["state.l1.w"], params_["state.l1.b"]));
  return ops::linear(h, params_["state.l2.w"], params_["state.l2.b"]);
}

Var SurferNet::predict_action(Var image_tokens, Var instruction, Var state_tokens, std::size_t batch) const {
  const std::size_t W = cfg_.window(), T = cfg_.tokens_per_frame;
  if (image_tokens.rows() != batch * W * T || instruction.rows() != batch || state_tokens.rows() != batch * W) {
    throw ShapeError("action module inputs do not hold " + std::to_string(W) + "-frame windows for " +
                     std::to_string(batch) + " samples");
  }
  Var q = ops::add(image_tokens, ops::gather_rows(params_["ap.time"], tiled_index(batch * W * T, T, W)));
  std::size_t per_sample = W * T;
  if (cfg_.variant == Variant::ConcatFusion) {
    const Var parts[] = {q, instruction, state_tokens};
    q = ops::concat_segments(parts, batch);
    per_sample += 1 + W;
    for (std::size_t i = 0; i < cfg_.layers; ++i) q = decoder_layer("ap.L" + std::to_string(i), q, nullptr, batch);
  } else {
    const Var parts[] = {instruction, state_tokens};
    const Var kv = ln("ap.kv_ln", ops::concat_segments(parts, batch));
    for (std::size_t i = 0; i < cfg_.layers; ++i) q = decoder_layer("ap.L" + std::to_string(i), q, &kv, batch);
  }
  const Var pooled = ops::segment_mean(ln("ap.out_ln", q), std::vector<std::size_t>(batch, per_sample));
  return mlp("ap.head", pooled);
}

Var SurferNet::predict_scene(Var image_tokens, Var condition, std::size_t batch) const {
  if (!cfg_.has_scene_module()) throw ConfigError("variant has no scene module");
  const std::size_t W = cfg_.window(), T = cfg_.tokens_per_frame;
  if (image_tokens.rows() != batch * W * T) throw ShapeError("scene module history does not match the window");
  Var cond;
  if (cfg_.variant == Variant::InstrSp) {
    if (condition.rows() != batch || condition.cols() != cfg_.d) throw ShapeError("scene condition must be [B x d]");
    cond = condition;
  } else {
    if (condition.rows() != batch || condition.cols() != 7) throw ShapeError("scene action must be [B x 7]");
    cond = mlp("sp.act", condition);
  }
  const Var history = ops::add(image_tokens, ops::gather_rows(params_["sp.time"], tiled_index(batch * W * T, T, W)));
  const Var parts[] = {history, cond};
  const Var kv = ln("sp.kv_ln", ops::concat_segments(parts, batch));
  Var q = ops::gather_rows(params_["sp.mask"], tiled_index(batch * T, 1, T));
  for (std::size_t i = 0; i < cfg_.scene_layers; ++i) q = decoder_layer("sp.L" + std::to_string(i), q, &kv, batch);
  return ops::linear(ln("sp.out_ln", q), params_["sp.out.w"], params_["sp.out.b"]);
}

SurferNet::Loss SurferNet::combine(Var predicted_action, Var label, const Var* predicted_scene,
                                   const Var* target) const {
  Loss out;
  out.action = ops::mse(predicted_action, label);
  if (!predicted_scene) {
    out.scene = tape_.constant(Tensor::scalar(0.0));
    out.total = out.action;
    return out;
  }
  out.scene = cfg_.scene_loss == SceneLoss::MeanDistance ? ops::mean_row_distance(*predicted_scene, *target)
                                                         : ops::mse(*predicted_scene, *target);
  out.total = ops::add(out.action, ops::scale(out.scene, cfg_.lambda));
  out.scene_computed = true;
  return out;
}

SurferNet::Loss SurferNet::loss(const Batch& b, const Tensor* scene_target) const {
  const std::size_t B = b.size;
  if (b.actions.rows() != B || b.actions.cols() != 7) throw ShapeError("batch lacks action labels");
  Var images, instruction, predicted;
  const Var label = tape_.constant(b.actions);
  in_branch("action", [&] {
    images = encode_images(b.patches);
    instruction = encode_instructions(b.tokens);
    predicted = predict_action(images, instruction, encode_states(b.states), B);
    return 0;
  });
  if (cfg_.lambda == 0.0 || !cfg_.has_scene_module()) {
    return in_branch("action", [&] { return combine(predicted, label, nullptr, nullptr); });
  }
  return in_branch("scene", [&] {
    Var target;
    if (scene_target) {
      if (scene_target->rows() != B * cfg_.tokens_per_frame || scene_target->cols() != cfg_.d) {
        throw ShapeError("scene target " + scene_target->shape_string() + " does not match the batch");
      }
      target = tape_.constant(*scene_target);
    } else {
      if (b.next_patches.rows() != B * cfg_.patches()) throw ShapeError("batch lacks next frames");
      tensor::NoGradGuard stop(tape_);
      target = encode_images(b.next_patches);
    }
    Var condition = instruction;
    if (cfg_.variant != Variant::InstrSp) condition = cfg_.teacher_forcing ? label : predicted;
    const Var scene = predict_scene(images, condition, B);
    return combine(predicted, label, &scene, &target);
  });
}

Tensor encode_image(const tensor::ParamStore& params, const ModelConfig& cfg, const sim::Image& image) {
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  return net.encode_images(patchify(image, cfg)).value();
}

Tensor encode_instruction(const tensor::ParamStore& params, const ModelConfig& cfg,
                          const std::vector<std::size_t>& tokens) {
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  return net.encode_instructions({tokens}).value();
}

Tensor encode_state(const tensor::ParamStore& params, const ModelConfig& cfg, const sim::RobotState& state) {
  const auto s = normalize_state(state);
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  return net.encode_states(Tensor(1, 7, std::vector<double>(s.begin(), s.end()))).value();
}

std::vector<sim::Action> predict_actions(const tensor::ParamStore& params, const ModelConfig& cfg,
                                         std::span<const ModelInput> inputs) {
  const Batch b = make_batch(inputs, cfg);
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  const Tensor out =
      net.predict_action(net.encode_images(b.patches), net.encode_instructions(b.tokens), net.encode_states(b.states),
                         b.size)
          .value();
  std::vector<sim::Action> actions;
  for (std::size_t i = 0; i < b.size; ++i) {
    std::array<double, 7> a;
    for (std::size_t j = 0; j < 7; ++j) a[j] = out(i, j);
    actions.push_back(sim::Action::from_array(a));
  }
  return actions;
}

sim::Action predict_action(const tensor::ParamStore& params, const ModelConfig& cfg, const ModelInput& input) {
  return predict_actions(params, cfg, std::span<const ModelInput>(&input, 1)).front();
}

Tensor predict_scene(const tensor::ParamStore& params, const ModelConfig& cfg, const Tensor& history_tokens,
                     const sim::Action& action) {
  if (history_tokens.rows() != cfg.window() * cfg.tokens_per_frame || history_tokens.cols() != cfg.d) {
    throw ShapeError("history tokens " + history_tokens.shape_string() + " do not match the window");
  }
  if (cfg.variant == Variant::InstrSp) throw ConfigError("instr-sp scene module is conditioned on the instruction");
  const auto a = action.to_array();
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  return net.predict_scene(tape.constant(history_tokens), tape.constant(Tensor(1, 7, std::vector<double>(a.begin(), a.end()))), 1)
      .value();
}

LossValues loss_values(const tensor::ParamStore& params, const ModelConfig& cfg, const Batch& batch,
                       const Tensor* scene_target) {
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  const auto l = net.loss(batch, scene_target);
  return {l.action.value().item(), l.scene.value().item(), l.total.value().item()};
}

Tensor scene_targets(const tensor::ParamStore& params, const ModelConfig& cfg, const Batch& batch) {
  if (batch.next_patches.rows() != batch.size * cfg.patches()) throw ShapeError("batch lacks next frames");
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  return net.encode_images(batch.next_patches).value();
}

void save_model(const std::filesystem::path& path, const tensor::ParamStore& params, const ModelConfig& cfg,
                const nlohmann::ordered_json& metadata) {
  check_params(params, cfg);
  const std::string bytes = tensor::encode_checkpoint(params);
  write_file(path, bytes);
  nlohmann::ordered_json card;
  card["checkpoint"] = path.filename().string();
  card["checkpoint_hash"] = hash_hex(bytes);
  card["parameters"] = params.scalar_count();
  card["model"] = to_json(cfg);
  for (const auto& [k, v] : metadata.items()) card[k] = v;
  auto card_path = path;
  card_path += ".card.json";
  write_file(card_path, card.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
  auto card_path = path;
  card_path += ".card.json";
  LoadedModel m;
  try {
    m.card = nlohmann::ordered_json::parse(read_file(card_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model card " + card_path.string() + ": " + e.what());
  }
  m.config = model_config_from_json(m.card.at("model"));
  m.params = tensor::load_checkpoint(path);
  check_params(m.params, m.config);
  return m;
}

}  // namespace surfer::model
