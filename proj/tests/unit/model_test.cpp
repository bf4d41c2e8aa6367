#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <doctest.h>

#include "model_fixtures.hpp"
#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"
#include "surfer/tensor/adam.hpp"
#include "surfer/tensor/checkpoint.hpp"

using namespace surfer;
using namespace surfer::model;
using surfer::tensor::Tensor;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.layers = 2;
  cfg.k = 2;
  cfg.vocab = 128;
  return cfg;
}

// Patch tokens before compression, computed with plain loops.
std::vector<std::vector<double>> patch_tokens(const tensor::ParamStore& p, const ModelConfig& cfg,
                                              const sim::Image& img) {
  const Tensor patches = patchify(img, cfg);
  const Tensor& w = p.at("img.proj.w");
  const Tensor& b = p.at("img.proj.b");
  const Tensor& pos = p.at("img.pos");
  std::vector<std::vector<double>> out(cfg.patches(), std::vector<double>(cfg.d));
  for (std::size_t r = 0; r < cfg.patches(); ++r) {
    for (std::size_t c = 0; c < cfg.d; ++c) {
      double s = b[c] + pos(r, c);
      for (std::size_t k = 0; k < cfg.patch_dim(); ++k) s += patches(r, k) * w(k, c);
      out[r][c] = s;
    }
  }
  return out;
}

// TokenLearner output with plain loops.
std::vector<std::vector<double>> compress(const tensor::ParamStore& p, const ModelConfig& cfg,
                                          const std::vector<std::vector<double>>& tokens) {
  const Tensor& w = p.at("img.tl.w");
  const Tensor& b = p.at("img.tl.b");
  const std::size_t n = tokens.size(), T = cfg.tokens_per_frame;
  std::vector<std::vector<double>> out(T, std::vector<double>(cfg.d, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> logit(n);
    for (std::size_t r = 0; r < n; ++r) {
      logit[r] = b[t];
      for (std::size_t c = 0; c < cfg.d; ++c) logit[r] += tokens[r][c] * w(c, t);
    }
    const double m = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double& l : logit) z += (l = std::exp(l - m));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cfg.d; ++c) out[t][c] += logit[r] / z * tokens[r][c];
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.d = 30;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.patch = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.variant = Variant::NoSp;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda = 0.0;
  CHECK_NOTHROW(cfg.validate());
  CHECK(model_config_from_json(to_json(cfg)).variant == Variant::NoSp);
  CHECK_THROWS_AS(parse_variant("bogus"), ConfigError);
}

TEST_CASE("image encoder") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 3);
  SUBCASE("all-zero image gives the bias-plus-position weighted sums") {
    const sim::Image zero;
    const Tensor a = encode_image(params, cfg, zero);
    CHECK(a == encode_image(params, cfg, zero));
    const auto expected = compress(params, cfg, patch_tokens(params, cfg, zero));
    REQUIRE(a.rows() == 8);
    REQUIRE(a.cols() == cfg.d);
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t c = 0; c < cfg.d; ++c) CHECK(a(t, c) == doctest::Approx(expected[t][c]).epsilon(1e-12));
  }
  SUBCASE("outputs are convex combinations of the patch tokens") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const sim::Image img = test::random_image(rng);
      const Tensor out = encode_image(params, cfg, img);
      CHECK(out.rows() == 8);
      const auto tokens = patch_tokens(params, cfg, img);
      for (std::size_t c = 0; c < cfg.d; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& t : tokens) {
          lo = std::min(lo, t[c]);
          hi = std::max(hi, t[c]);
        }
        for (std::size_t t = 0; t < 8; ++t) {
          CHECK(out(t, c) >= lo - 1e-9);
          CHECK(out(t, c) <= hi + 1e-9);
        }
      }
    }
  }
  SUBCASE("wrong resolution is a shape error") {
    sim::Image bad;
    bad.pixels.resize(10);
    CHECK_THROWS_AS(encode_image(params, cfg, bad), ShapeError);
  }
}

TEST_CASE("instruction encoder") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 4);
  SUBCASE("single token is its projected embedding") {
    const Tensor e = encode_instruction(params, cfg, {7});
    const Tensor& emb = params.at("ins.embed");
    const Tensor& w = params.at("ins.proj.w");
    const Tensor& b = params.at("ins.proj.b");
    for (std::size_t c = 0; c < cfg.d; ++c) {
      double s = b[c];
      for (std::size_t k = 0; k < cfg.d; ++k) s += emb(7, k) * w(k, c);
      CHECK(e(0, c) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  SUBCASE("mean pooling ignores order") {
    CHECK(encode_instruction(params, cfg, {1, 2, 3, 9}) == encode_instruction(params, cfg, {9, 3, 1, 2}));
  }
  SUBCASE("disjoint instructions differ") {
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
      const std::size_t a = rng.index(cfg.vocab / 2), b = cfg.vocab / 2 + rng.index(cfg.vocab / 2);
      CHECK(encode_instruction(params, cfg, {a}) != encode_instruction(params, cfg, {b}));
    }
  }
  SUBCASE("token ids") {
    CHECK_THROWS_AS(instruction_token_ids("  ", cfg), ConfigError);
    CHECK_THROWS_AS(encode_instruction(params, cfg, {}), ConfigError);
    bool truncated = false;
    std::string longer;
    for (int i = 0; i < 40; ++i) longer += "w" + std::to_string(i) + " ";
    CHECK(instruction_token_ids(longer, cfg, &truncated).size() == 32);
    CHECK(truncated);
    CHECK(instruction_token_ids("pick ADMilk", cfg, &truncated).size() == 2);
    CHECK_FALSE(truncated);
    CHECK(instruction_token_ids("Pick the ADMilk.", cfg) == instruction_token_ids("pick the admilk", cfg));
  }
}

TEST_CASE("state encoder") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 5);
  const sim::RobotState s{1, 30, 10, 0.1, -0.1, 0.5, 1};
  const Tensor a = encode_state(params, cfg, s);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == cfg.d);
  CHECK(a == encode_state(params, cfg, s));
  sim::RobotState bad = s;
  bad.z = std::nan("");
  CHECK_THROWS_AS(encode_state(params, cfg, bad), NumericError);

  // Sinusoidal features: coordinate, then sin/cos at octave i, period 2 / 2^i.
  {
    const auto n = normalize_state(s);
    const Tensor raw(1, 7, std::vector<double>(n.begin(), n.end()));
    const Tensor f = state_features(raw, cfg);
    const std::size_t F = cfg.state_frequencies, stride = 1 + 2 * F;
    REQUIRE(f.cols() == 7 * stride);
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(f(0, c * stride) == n[c]);
      for (std::size_t i = 0; i < F; ++i) {
        const double angle = std::ldexp(n[c], static_cast<int>(i)) * std::acos(-1.0);
        CHECK(f(0, c * stride + 1 + 2 * i) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
        CHECK(f(0, c * stride + 2 + 2 * i) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
      }
    }
    ModelConfig plain = cfg;
    plain.state_frequencies = 0;
    CHECK(state_features(raw, plain) == raw);
  }

  // Gradient through the MLP against central differences.
  std::uint64_t st = 11;
  const Tensor weights = testing::random_tensor(3, cfg.d, st);
  Tensor states(3, 7);
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = testing::random_tensor(1, 1, st)[0];
  auto f = [&](const std::vector<Tensor>& in) {
    tensor::ParamStore p = params;
    p.at("state.l1.w") = in[0];
    p.at("state.l1.b") = in[1];
    p.at("state.l2.w") = in[2];
    p.at("state.l2.b") = in[3];
    tensor::Tape tape;
    const SurferNet net(cfg, tape, p);
    const auto y = net.encode_states(states);
    return tensor::sum(tensor::mul(y, tape.constant(weights))).value().item();
  };
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  const auto y = net.encode_states(states);
  const auto loss = tensor::sum(tensor::mul(y, tape.constant(weights)));
  const auto g = net.params().gradients(tape.backward(loss));
  const auto numeric = testing::numeric_gradients(
      f, {params.at("state.l1.w"), params.at("state.l1.b"), params.at("state.l2.w"), params.at("state.l2.b")});
  CHECK(testing::max_relative_error(g.at("state.l1.w"), numeric[0]) < 1e-5);
  CHECK(testing::max_relative_error(g.at("state.l1.b"), numeric[1]) < 1e-5);
  CHECK(testing::max_relative_error(g.at("state.l2.w"), numeric[2]) < 1e-5);
  CHECK(testing::max_relative_error(g.at("state.l2.b"), numeric[3]) < 1e-5);
}

TEST_CASE("action prediction") {
  for (std::size_t k : {0, 1, 3}) {
    ModelConfig cfg = small_config();
    cfg.k = k;
    auto params = init_params(cfg, 6);
    Rng rng(k);
    const ModelInput in = test::random_input(cfg, rng);
    const auto a = predict_action(params, cfg, in);
    CHECK(a == predict_action(params, cfg, in));
    CHECK(a.to_array().size() == 7);

    ModelInput short_window = in;
    short_window.images.pop_back();
    CHECK_THROWS_AS(predict_action(params, cfg, short_window), ShapeError);

    params.at("ap.head.2.w") = Tensor(cfg.d, 7, 0.0);
    params.at("ap.head.2.b") = Tensor(1, 7, 0.0);
    CHECK(predict_action(params, cfg, in) == sim::Action{});
    CHECK(predict_action(params, cfg, test::random_input(cfg, rng)) == sim::Action{});
  }
}

TEST_CASE("padding") {
  const ModelConfig cfg = small_config();  // k = 2
  const auto params = init_params(cfg, 7);
  Rng rng(9);
  std::vector<sim::Image> frames;
  std::vector<sim::RobotState> states;
  for (int i = 0; i < 3; ++i) {
    frames.push_back(test::random_image(rng));
    states.push_back(test::random_state(rng));
  }
  CHECK(window_indices(0, 2) == std::vector<std::size_t>{0, 0, 0});
  CHECK(window_indices(1, 2) == std::vector<std::size_t>{0, 0, 1});
  CHECK(window_indices(5, 2) == std::vector<std::size_t>{3, 4, 5});

  // Episode of exactly k + 1 frames: the full window needs no padding, and
  // the same window reached through the padding path gives identical output.
  const ModelInput full = make_input(frames, states, 2, 2, {1, 2});
  CHECK_FALSE(full.padded);
  std::vector<sim::Image> longer_frames{frames[0], frames[0], frames[0], frames[1], frames[2]};
  std::vector<sim::RobotState> longer_states{states[0], states[0], states[0], states[1], states[2]};
  const ModelInput via_padding = make_input(std::span(longer_frames).subspan(2), std::span(longer_states).subspan(2), 2, 2, {1, 2});
  CHECK(predict_action(params, cfg, full) == predict_action(params, cfg, via_padding));
  const ModelInput padded = make_input(frames, states, 0, 2, {1, 2});
  CHECK(padded.padded);
  const ModelInput explicit_repeat = make_input(longer_frames, longer_states, 2, 2, {1, 2});
  CHECK_FALSE(explicit_repeat.padded);
  CHECK(predict_action(params, cfg, padded) == predict_action(params, cfg, explicit_repeat));
}

TEST_CASE("scene prediction") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 8);
  Rng rng(10);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const ModelInput in = test::random_input(cfg, rng);
    Tensor history(cfg.window() * 8, cfg.d);
    for (std::size_t f = 0; f < cfg.window(); ++f) {
      const Tensor t = encode_image(params, cfg, in.images[f]);
      std::copy(t.ptr(), t.ptr() + t.size(), history.ptr() + f * t.size());
    }
    const sim::Action a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), 0, 0, 0, rng.uniform(-0.25, 0.25)};
    const sim::Action b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), 0, 0, 0, rng.uniform(-0.25, 0.25)};
    const Tensor pa = predict_scene(params, cfg, history, a);
    const Tensor pb = predict_scene(params, cfg, history, b);
    CHECK(pa.rows() == 8);
    CHECK(pa.cols() == cfg.d);
    double diff = 0.0;
    for (std::size_t j = 0; j < pa.size(); ++j) diff = std::max(diff, std::abs(pa[j] - pb[j]));
    CHECK(diff > 0.0);
    worst = std::max(worst, diff);
  }
  CHECK(worst > 1e-6);
  CHECK_THROWS_AS(predict_scene(params, cfg, Tensor(3, cfg.d), sim::Action{}), ShapeError);

  // The scene loss reaches the action embedder.
  const Batch batch = test::random_batch(cfg, 3, 12);
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  const auto loss = net.loss(batch);
  REQUIRE(loss.scene_computed);
  const auto g = net.params().gradients(tape.backward(loss.scene));
  for (const char* name : {"sp.act.1.w", "sp.act.1.b", "sp.act.2.w", "sp.act.2.b"}) {
    double norm = 0.0;
    for (double v : g.at(name).data()) norm += v * v;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("losses") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 9);
  tensor::Tape tape;
  const SurferNet net(cfg, tape, params);
  SUBCASE("perfect prediction is zero") {
    const auto a = tape.constant(Tensor(2, 7, 0.3));
    const auto s = tape.constant(Tensor(16, cfg.d, -0.2));
    const auto l = net.combine(a, a, &s, &s);
    CHECK(l.action.value().item() == 0.0);
    CHECK(l.scene.value().item() == 0.0);
    CHECK(l.total.value().item() == 0.0);
  }
  SUBCASE("one unit action error is 1/7") {
    const auto p = tape.constant(Tensor(1, 7, std::vector<double>{1, 0, 0, 0, 0, 0, 0}));
    const auto y = tape.constant(Tensor(1, 7, 0.0));
    CHECK(net.combine(p, y, nullptr, nullptr).action.value().item() == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  }
  SUBCASE("scene term is the mean per-token distance") {
    Tensor a(2, cfg.d, 0.0), b(2, cfg.d, 0.0);
    a(0, 0) = 3.0;
    a(0, 1) = 4.0;  // distance 5 for the first token, 0 for the second
    const auto pa = tape.constant(a), pb = tape.constant(b);
    const auto y = tape.constant(Tensor(1, 7, 0.0));
    const auto l = net.combine(y, y, &pa, &pb);
    CHECK(l.scene.value().item() == doctest::Approx(2.5));
  }
  SUBCASE("lambda zero leaves only the action term") {
    ModelConfig zero = cfg;
    zero.lambda = 0.0;
    const Batch batch = test::random_batch(cfg, 2, 13);
    const auto v = loss_values(params, zero, batch);
    CHECK(v.total == v.action);
    CHECK(v.scene == 0.0);
    CHECK(loss_values(params, cfg, batch).action == v.action);
  }
  SUBCASE("non-finite values name the branch") {
    Batch batch = test::random_batch(cfg, 2, 14);
    batch.next_patches[0] = 1e308;  // overflows inside the target encoder
    try {
      loss_values(params, cfg, batch);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("scene branch") != std::string::npos);
    }
    batch = test::random_batch(cfg, 2, 14);
    batch.patches[0] = std::numeric_limits<double>::infinity();
    try {
      loss_values(params, cfg, batch);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("action branch") != std::string::npos);
    }
  }
}

TEST_CASE("end-to-end gradient check") {
  const auto errors = test::model_gradcheck(test::gradcheck_config(), 2, 21);
  CHECK(errors.size() == param_names(test::gradcheck_config()).size());
  for (const auto& [name, e] : errors) {
    INFO(name);
    CHECK(e.worst < 1e-4);
    CHECK(e.entries > 0);
  }
}

TEST_CASE("variants") {
  ModelConfig full = small_config();
  ModelConfig nosp = full;
  nosp.variant = Variant::NoSp;
  nosp.lambda = 0.0;
  ModelConfig concat = full;
  concat.variant = Variant::ConcatFusion;
  ModelConfig instr = full;
  instr.variant = Variant::InstrSp;

  const auto pf = init_params(full, 1), pn = init_params(nosp, 1), pc = init_params(concat, 1), pi = init_params(instr, 1);
  for (const auto& [name, value] : pn.entries()) {
    REQUIRE(pf.contains(name));
    CHECK(pf.at(name) == value);
  }
  CHECK(pn.size() < pf.size());
  for (const auto& [name, value] : pn.entries()) CHECK(name.rfind("sp.", 0) != 0);
  CHECK_FALSE(pi.contains("sp.act.1.w"));
  const double ratio = static_cast<double>(pc.scalar_count()) / static_cast<double>(pf.scalar_count());
  CHECK(ratio > 0.9);
  CHECK(ratio < 1.1);
  ModelConfig big;
  ModelConfig big_concat = big;
  big_concat.variant = Variant::ConcatFusion;
  const double big_ratio = static_cast<double>(init_params(big_concat, 1).scalar_count()) /
                           static_cast<double>(init_params(big, 1).scalar_count());
  CHECK(big_ratio > 0.9);
  CHECK(big_ratio < 1.1);

  Rng rng(3);
  const ModelInput in = test::random_input(full, rng);
  for (const auto& [cfg, p] : {std::pair{full, pf}, std::pair{nosp, pn}, std::pair{concat, pc}, std::pair{instr, pi}}) {
    CHECK(predict_action(p, cfg, in).to_array().size() == 7);
    const Batch batch = test::random_batch(cfg, 2, 5);
    CHECK(std::isfinite(loss_values(p, cfg, batch).total));
  }
  CHECK_THROWS_AS(SurferNet(full, *std::make_unique<tensor::Tape>(), pn), ConfigError);
}

TEST_CASE("checkpoint and model card") {
  const ModelConfig cfg = small_config();
  const auto params = init_params(cfg, 2);
  const auto dir = std::filesystem::temp_directory_path() / "surfer_model_test";
  std::filesystem::create_directories(dir);
  save_model(dir / "m.ckpt", params, cfg, {{"dataset_hash", "abc"}});
  const auto loaded = load_model(dir / "m.ckpt");
  CHECK(loaded.card["dataset_hash"] == "abc");
  CHECK(loaded.config.d == cfg.d);
  for (const auto& [name, value] : params.entries()) {
    const Tensor& back = loaded.params.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(value[i])));
  }
  save_model(dir / "m2.ckpt", loaded.params, loaded.config, {{"dataset_hash", "abc"}});
  CHECK(read_file(dir / "m.ckpt") == read_file(dir / "m2.ckpt"));
  ModelConfig other = cfg;
  other.d = 32;
  CHECK_THROWS_AS(check_params(loaded.params, other), ConfigError);
}
