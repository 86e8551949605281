#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stvg/errors.hpp"
#include "stvg/model.hpp"
#include "stvg/synth.hpp"

using namespace stvg;
using namespace stvg::model;

namespace {

synth::GenOptions small_gen() {
  synth::GenOptions opts;
  opts.preset = "motion";
  opts.n_videos = 15;
  opts.seed = 21;
  opts.n_frames = 60;
  opts.event_length = 20;
  opts.n_events = 1;
  return opts;
}

ModelConfig small_config(const std::string& variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = 12;
  cfg.hidden_dim = 10;
  cfg.mloc_hidden = 6;
  cfg.epochs = 3;
  cfg.seed = 5;
  cfg.train_frame_stride = 4;
  return cfg;
}

struct Fixture {
  Dataset data = synth::build_dataset(small_gen());
  BoxFeatureProvider provider{train_attribute_vocab(data), 77, 0.001};
  GroundingModel make(const std::string& variant) {
    GroundingModel m(small_config(variant));
    m.init(data, provider.appearance_dim());
    return m;
  }
  const GroundingInstance& first_test_instance() const {
    return *data.split_instances("test").front();
  }
};

}  // namespace

TEST_CASE("hinge loss arithmetic") {
  // both margins satisfied by at least the margin
  CHECK(hinge_loss(0.9, 0.2, 0.1, 0.1, 1.0, 1.0) == 0.0);
  // hand case: term1 = 0.1 + 0.55 - 0.5 = 0.15, term2 inactive
  CHECK(hinge_loss(0.5, 0.55, 0.3, 0.1, 1.0, 1.0) == doctest::Approx(0.15).epsilon(1e-12));
  // lambda1 = 0 leaves only the hard-object term
  CHECK(hinge_loss(0.5, 0.9, 0.9, 0.1, 0.0, 2.0) == doctest::Approx(2.0 * 0.5));
  CHECK_THROWS_AS(hinge_loss(0, 0, 0, -0.1, 1, 1), ConfigError);
  CHECK_THROWS_AS(hinge_loss(0, 0, 0, 0.1, -1, 1), ConfigError);
}

TEST_CASE("hinge loss is zero iff both margins are satisfied") {
  Rng rng(66);
  for (int i = 0; i < 500; ++i) {
    const double sp = rng.uniform(-1, 1);
    const double se = rng.uniform(-1, 1);
    const double so = rng.uniform(-1, 1);
    const double margin = rng.uniform(0, 0.5);
    const double l = hinge_loss(sp, se, so, margin, 1.0, 1.0);
    CHECK(l >= 0.0);
    const bool satisfied = sp - se >= margin && sp - so >= margin;
    if (satisfied)
      CHECK(l == 0.0);
    else
      CHECK(l > 0.0);
  }
}

TEST_CASE("attribute loss closed forms") {
  const std::vector<std::string> vocab{"blue", "red"};
  SUBCASE("confident and correct is near zero") {
    CHECK(attribute_loss(std::vector<double>{-10.0, 10.0}, {"red"}, vocab) < 1e-3);
  }
  SUBCASE("uniform 0.5 predictions give ln 2") {
    CHECK(attribute_loss(std::vector<double>{0.0, 0.0}, {"red"}, vocab) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("empty gold set is the all-negative loss") {
    const double l = attribute_loss(std::vector<double>{-10.0, -10.0}, {}, vocab);
    CHECK(l < 1e-3);
  }
  SUBCASE("unknown gold attribute is ignored") {
    const double with_unknown =
        attribute_loss(std::vector<double>{0.0, 0.0}, {"chartreuse"}, vocab);
    const double empty = attribute_loss(std::vector<double>{0.0, 0.0}, {}, vocab);
    CHECK(with_unknown == doctest::Approx(empty));
  }
}

TEST_CASE("ranking order and invariances") {
  CHECK(ranking_order({0.1, 0.9, 0.4}) == std::vector<int>{1, 2, 0});
  CHECK(ranking_order({0.5, 0.5, 0.1}) == std::vector<int>{0, 1, 2});  // tie: lower index

  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> totals(2 + static_cast<size_t>(rng.uniform_int(5)));
    for (auto& v : totals) v = rng.uniform(-1, 1);
    const auto base = ranking_order(totals);
    std::vector<double> shifted = totals, scaled = totals;
    const double c = rng.uniform(0.1, 5.0);
    const double k = rng.uniform(-3, 3);
    for (auto& v : shifted) v += k;
    for (auto& v : scaled) v *= c;
    CHECK(ranking_order(shifted) == base);      // additive shift keeps order
    CHECK(ranking_order(scaled)[0] == base[0]);  // positive scaling keeps argmax
  }
}

TEST_CASE("variant module sets") {
  CHECK(small_config("rgb").active_modules() ==
        std::vector<std::string>{"subj", "loc", "rel"});
  CHECK(small_config("flow").active_modules() ==
        std::vector<std::string>{"loc", "subj_motion", "rel_motion"});
  CHECK(small_config("fused1").active_modules() ==
        std::vector<std::string>{"subj", "loc", "rel", "subj_motion", "rel_motion"});
  CHECK(small_config("fused5").active_modules() ==
        std::vector<std::string>{"subj", "loc", "rel", "subj_motion", "rel_motion",
                                 "moving_loc"});
  CHECK(small_config("flow5").stacked_flow());
  CHECK_THROWS_AS(small_config("wat").active_modules(), ConfigError);
}

TEST_CASE("score breakdown recomposes as dot(weights, module scores)") {
  Fixture fx;
  const auto model = fx.make("fused1");
  const auto& inst = fx.first_test_instance();
  std::vector<ScoreBreakdown> bds;
  model.rank(*fx.data.video(inst.video_id), inst, fx.provider, &bds);
  REQUIRE(bds.size() == inst.candidates.size());
  for (const auto& b : bds) {
    REQUIRE(b.modules.size() == b.module_weights.size());
    double total = 0;
    for (size_t m = 0; m < b.modules.size(); ++m)
      total += b.module_weights[m] * b.modules[m].score;
    CHECK(std::abs(total - b.total) < 1e-9);
    for (const auto& ms : b.modules) {
      double mean = 0;
      for (double v : ms.per_frame) mean += v;
      mean /= static_cast<double>(ms.per_frame.size());
      CHECK(std::abs(mean - ms.score) < 1e-9);
      CHECK(ms.score >= -1.0 - 1e-9);
      CHECK(ms.score <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("recomposition on 1000 random breakdown draws") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const int m = 2 + rng.uniform_int(5);
    std::vector<double> w(static_cast<size_t>(m)), s(static_cast<size_t>(m));
    double z = 0;
    for (auto& v : w) {
      v = rng.uniform(0, 1);
      z += v;
    }
    for (auto& v : w) v /= z;
    for (auto& v : s) v = rng.uniform(-1, 1);
    ad::Tape t;
    const double total = t.value(t.dot(t.input(w), t.input(s)));
    double expect = 0;
    for (int k = 0; k < m; ++k) expect += w[static_cast<size_t>(k)] * s[static_cast<size_t>(k)];
    CHECK(std::abs(total - expect) < 1e-9);
  }
}

TEST_CASE("ranking is deterministic across runs") {
  Fixture fx;
  const auto model = fx.make("rgb");
  const auto& inst = fx.first_test_instance();
  const auto a = model.rank(*fx.data.video(inst.video_id), inst, fx.provider);
  const auto b = model.rank(*fx.data.video(inst.video_id), inst, fx.provider);
  CHECK(a == b);
}

TEST_CASE("ablation") {
  Fixture fx;
  const auto model = fx.make("fused1");
  const auto& inst = fx.first_test_instance();
  const auto& video = *fx.data.video(inst.video_id);

  SUBCASE("disabling nothing changes nothing") {
    const std::set<std::string> none;
    CHECK(model.rank(video, inst, fx.provider) ==
          model.rank(video, inst, fx.provider, nullptr, &none));
  }
  SUBCASE("disabling all but subject leaves total == w_subj * s_subj") {
    const std::set<std::string> disabled{"loc", "rel", "subj_motion", "rel_motion"};
    std::vector<ScoreBreakdown> bds;
    model.rank(video, inst, fx.provider, &bds, &disabled);
    for (const auto& b : bds) {
      CHECK(std::abs(b.total - b.module_weights[0] * b.modules[0].score) < 1e-9);
      for (size_t m = 1; m < b.module_weights.size(); ++m)
        CHECK(b.module_weights[m] == 0.0);
    }
  }
  SUBCASE("weights are not renormalized after zeroing") {
    const std::set<std::string> disabled{"loc"};
    std::vector<ScoreBreakdown> plain_bds, masked_bds;
    model.rank(video, inst, fx.provider, &plain_bds);
    model.rank(video, inst, fx.provider, &masked_bds, &disabled);
    double masked_sum = 0;
    for (double w : masked_bds[0].module_weights) masked_sum += w;
    CHECK(masked_sum < 1.0 - 1e-6);  // mass of the zeroed module is gone
    CHECK(masked_bds[0].module_weights[0] == doctest::Approx(plain_bds[0].module_weights[0]));
  }
  SUBCASE("disabling everything flags the report and falls back to the tie rule") {
    const std::set<std::string> all{"subj", "loc", "rel", "subj_motion", "rel_motion"};
    const auto order = model.rank(video, inst, fx.provider, nullptr, &all);
    for (size_t i = 0; i < order.size(); ++i) CHECK(order[i] == static_cast<int>(i));
    const auto rep = model.evaluate(fx.data, "test", fx.provider, &all);
    CHECK(rep.all_modules_disabled);
  }
  SUBCASE("disabling an inactive module is a config error") {
    const std::set<std::string> bad{"moving_loc"};
    CHECK_THROWS_AS(model.rank(video, inst, fx.provider, nullptr, &bad), ConfigError);
  }
}

TEST_CASE("training with all-zero loss weights leaves parameters unchanged") {
  Fixture fx;
  ModelConfig cfg = small_config("rgb");
  cfg.lambda1 = cfg.lambda2 = cfg.lambda_att = 0.0;
  cfg.epochs = 2;
  GroundingModel m(cfg);
  m.init(fx.data, fx.provider.appearance_dim());
  const auto before = m.params().tensors();
  m.train(fx.data, fx.provider);
  const auto& after = m.params().tensors();
  for (const auto& [name, t] : before) CHECK(after.at(name).value == t.value);
}

TEST_CASE("training reduces the loss on synthetic data") {
  Fixture fx;
  ModelConfig cfg = small_config("rgb");
  cfg.epochs = 6;
  GroundingModel m(cfg);
  m.init(fx.data, fx.provider.appearance_dim());
  const auto log = m.train(fx.data, fx.provider);
  REQUIRE(log.epoch_loss.size() == 6);
  CHECK(log.epoch_loss.front() > log.epoch_loss.back());
}

TEST_CASE("training is deterministic under a fixed seed") {
  Fixture fx;
  auto run = [&] {
    GroundingModel m(small_config("rgb"));
    m.init(fx.data, fx.provider.appearance_dim());
    m.train(fx.data, fx.provider);
    return m.params().tensors();
  };
  const auto a = run();
  const auto b = run();
  for (const auto& [name, t] : a) CHECK(b.at(name).value == t.value);
}

TEST_CASE("full-model gradient check against central differences") {
  Fixture fx;
  ModelConfig cfg = small_config("fused5");
  cfg.margin = 0.5;  // keep both hinge terms active
  GroundingModel m(cfg);
  m.init(fx.data, fx.provider.appearance_dim());

  const auto* inst = fx.data.split_instances("train").front();
  const auto* other = fx.data.split_instances("train")[1];
  const auto& video = *fx.data.video(inst->video_id);
  const auto feats = fx.provider.features(video, *inst);
  const int o_k = inst->target_index == 0 ? 1 : 0;

  lang::EncoderConfig ec{cfg.embed_dim, cfg.hidden_dim, cfg.active_modules()};

  auto build = [&](ad::Tape& t) -> ad::Var {
    const auto enc_pos = lang::encode_expression(t, m.params(), ec, m.vocab(), inst->expression);
    const auto enc_neg = lang::encode_expression(t, m.params(), ec, m.vocab(), other->expression);
    // the same graph the trainer builds
    const ad::Var sp = m.score_on_tape(t, enc_pos, feats[static_cast<size_t>(inst->target_index)]);
    const ad::Var se = m.score_on_tape(t, enc_neg, feats[static_cast<size_t>(inst->target_index)]);
    const ad::Var so = m.score_on_tape(t, enc_pos, feats[static_cast<size_t>(o_k)]);
    ad::Var h1 = t.relu_(t.add_const(t.sub(se, sp), cfg.margin));
    ad::Var h2 = t.relu_(t.add_const(t.sub(so, sp), cfg.margin));
    return t.add(h1, h2);
  };

  auto value = [&] {
    ad::Tape t;
    return t.value(build(t));
  };

  ad::Tape t;
  m.params().zero_grad();
  t.backward(build(t));

  Rng pick(4242);
  const auto names = [&] {
    std::vector<std::string> out;
    for (const auto& [name, _] : m.params().tensors()) out.push_back(name);
    return out;
  }();
  int checked = 0;
  while (checked < 20) {
    const auto& name = names[static_cast<size_t>(pick.uniform_int(static_cast<int>(names.size())))];
    auto& tensor = m.params().at(name);
    const size_t idx = static_cast<size_t>(pick.uniform_int(tensor.size()));
    const double analytic = tensor.grad[idx];

    double& p = tensor.value[idx];
    const double keep = p;
    const double h = 1e-5;
    p = keep + h;
    const double up = value();
    p = keep - h;
    const double down = value();
    p = keep;
    const double numeric = (up - down) / (2 * h);
    if (std::abs(analytic) < 1e-10 && std::abs(numeric) < 1e-10) continue;  // untouched slot
    const double rel =
        std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
    CAPTURE(name);
    CAPTURE(idx);
    CHECK(rel <= 1e-4);
    ++checked;
  }
}

TEST_CASE("parameter save/load round trip") {
  namespace fs = std::filesystem;
  Fixture fx;
  auto model = fx.make("fused1");
  const auto path = (fs::temp_directory_path() / "stvg_tests" / "params.stvg").string();
  fs::create_directories(fs::temp_directory_path() / "stvg_tests");
  model.save(path);
  const auto back = GroundingModel::load(path);
  CHECK(back.config().variant == "fused1");
  CHECK(back.vocab().words() == model.vocab().words());
  for (const auto& [name, t] : model.params().tensors())
    CHECK(back.params().at(name).value == t.value);

  // identical rankings after reload
  const auto& inst = fx.first_test_instance();
  const auto& video = *fx.data.video(inst.video_id);
  CHECK(model.rank(video, inst, fx.provider) == back.rank(video, inst, fx.provider));
}

TEST_CASE("train skips instances without same-interval distractor expressions") {
  Fixture fx;
  Dataset lonely = fx.data;
  // keep only the first instance of each (video, interval) group in train
  std::vector<GroundingInstance> kept;
  std::set<std::string> seen;
  for (const auto& inst : lonely.instances) {
    const std::string key = inst.video_id + "/" + std::to_string(inst.interval.start);
    if (lonely.split.train.count(inst.video_id)) {
      if (seen.count(key)) continue;
      seen.insert(key);
    }
    kept.push_back(inst);
  }
  lonely.instances = kept;
  ModelConfig cfg = small_config("rgb");
  cfg.epochs = 1;
  GroundingModel m(cfg);
  m.init(lonely, fx.provider.appearance_dim());
  const auto log = m.train(lonely, fx.provider);
  CHECK(log.skipped_instances > 0);
}
