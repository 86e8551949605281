#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stvg/errors.hpp"
#include "stvg/vismod.hpp"

using namespace stvg;
using namespace stvg::vismod;

namespace {

// 2x2 identity projection with zero bias
struct IdentityProj {
  ad::ParamStore ps;
  Projection p;
  IdentityProj(int out_dim, int in_dim) {
    ad::Tensor& W = ps.create("W", {out_dim, in_dim});
    for (int r = 0; r < std::min(out_dim, in_dim); ++r)
      W.value[static_cast<size_t>(r * in_dim + r)] = 1.0;
    ad::Tensor& b = ps.create("b", {out_dim});
    p = {&W, &b};
  }
};

FrameFeatures frame_with_location(std::array<double, 5> loc) {
  FrameFeatures ff;
  ff.location = loc;
  return ff;
}

}  // namespace

TEST_CASE("subject score on parallel, orthogonal, and mixed frames") {
  IdentityProj proj(2, 2);
  const std::vector<double> q{1.0, 0.0};

  SUBCASE("parallel features score 1.0") {
    const auto ms = subject_score({{2.0, 0.0}, {0.5, 0.0}}, q, proj.p);
    CHECK(ms.score == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("orthogonal features score 0.0") {
    const auto ms = subject_score({{0.0, 3.0}}, q, proj.p);
    CHECK(ms.score == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("per-frame scores [1, 0] pool to 0.5") {
    const auto ms = subject_score({{1.0, 0.0}, {0.0, 1.0}}, q, proj.p);
    REQUIRE(ms.per_frame.size() == 2);
    CHECK(ms.per_frame[0] == doctest::Approx(1.0));
    CHECK(ms.per_frame[1] == doctest::Approx(0.0));
    CHECK(ms.score == doctest::Approx(0.5));
  }
  SUBCASE("no frames is an error") {
    CHECK_THROWS_AS(subject_score({}, q, proj.p), Error);
  }
  SUBCASE("dimension mismatch is an error") {
    CHECK_THROWS_AS(subject_score({{1.0, 0.0, 0.0}}, q, proj.p), Error);
  }
}

TEST_CASE("pooled equals the arithmetic mean of per-frame scores") {
  ad::ParamStore ps;
  Rng rng(21);
  ad::Tensor& W = ps.create("W", {4, 2});
  ad::init_uniform(W, rng);
  ad::Tensor& b = ps.create("b", {4});
  ad::init_uniform(b, rng, 0.1);
  Projection p{&W, &b};
  std::vector<std::vector<double>> frames;
  for (int f = 0; f < 9; ++f) frames.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                        rng.uniform(-1, 1)};
  const auto ms = subject_score(frames, q, p);
  double mean = 0;
  for (double v : ms.per_frame) {
    mean += v;
    CHECK(v >= -1.0 - 1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
  mean /= static_cast<double>(ms.per_frame.size());
  CHECK(std::abs(ms.score - mean) < 1e-9);
}

TEST_CASE("frame permutation leaves pooled subject score unchanged") {
  ad::ParamStore ps;
  Rng rng(4);
  ad::Tensor& W = ps.create("W", {3, 2});
  ad::init_uniform(W, rng);
  Projection p{&W, nullptr};
  std::vector<std::vector<double>> frames;
  for (int f = 0; f < 6; ++f) frames.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<double> q{0.3, -0.2, 0.9};
  const double base = subject_score(frames, q, p).score;
  std::reverse(frames.begin(), frames.end());
  CHECK(subject_score(frames, q, p).score == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("location input layout and normalization check") {
  FrameFeatures ff = frame_with_location({0.1, 0.2, 0.5, 0.9, 0.3});
  ff.deltas.push_back({-0.5, 0.0, -0.5, 0.0, 0.0});

  SUBCASE("sole context is zero-padded to five slots") {
    const auto in = location_input(ff);
    REQUIRE(in.size() == 30);
    CHECK(in[5] == -0.5);
    for (size_t k = 10; k < 30; ++k) CHECK(in[k] == 0.0);
  }
  SUBCASE("unnormalized coordinates are rejected") {
    FrameFeatures bad = frame_with_location({0.0, 0.0, 12.0, 1.0, 0.5});
    CHECK_THROWS_AS(location_input(bad), ValidationError);
  }
}

TEST_CASE("location score via projection") {
  IdentityProj proj(2, 30);
  std::vector<FrameFeatures> frames{frame_with_location({1.0, 0.0, 0.0, 0.0, 0.0})};
  const auto ms = location_score(frames, std::vector<double>{1.0, 0.0}, proj.p);
  CHECK(ms.score == doctest::Approx(1.0));
}

TEST_CASE("relationship score: max over contexts, sentinel without contexts") {
  // projection keeps the first two coordinates (the context appearance)
  IdentityProj proj(2, 7);
  const std::vector<double> q{1.0, 0.0};

  SUBCASE("single parallel context scores 1.0") {
    FrameFeatures ff;
    ff.ctx_appearance.push_back({3.0, 0.0});
    ff.deltas.push_back({0, 0, 0, 0, 0});
    ff.ctx_motion.push_back({0, 0, 0});
    const auto ms = relationship_score({ff}, q, proj.p, false);
    CHECK(ms.score == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("contexts scoring 0.2 and 0.9 give frame score 0.9") {
    FrameFeatures ff;
    ff.ctx_appearance.push_back({0.2, std::sqrt(1.0 - 0.04)});
    ff.ctx_appearance.push_back({0.9, std::sqrt(1.0 - 0.81)});
    ff.deltas.push_back({0, 0, 0, 0, 0});
    ff.deltas.push_back({0, 0, 0, 0, 0});
    ff.ctx_motion.push_back({0, 0, 0});
    ff.ctx_motion.push_back({0, 0, 0});
    const auto ms = relationship_score({ff}, q, proj.p, false);
    CHECK(ms.score == doctest::Approx(0.9).epsilon(1e-9));
  }
  SUBCASE("zero contexts score the -1 sentinel") {
    FrameFeatures ff;
    const auto ms = relationship_score({ff}, q, proj.p, false);
    CHECK(ms.score == -1.0);
  }
}

TEST_CASE("stacked motion descriptor clamps at the array edges") {
  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = 3;
  for (int f = 0; f < 3; ++f) {
    FrameFeatures ff;
    ff.motion = {static_cast<double>(f + 1), 0.0, 0.0};
    cf.frames.push_back(ff);
  }
  ad::Tape t;
  const auto v = t.values(stacked_motion(t, cf, 0));
  REQUIRE(v.size() == 15);
  // frames -2,-1 clamp to frame 0: [f0,f0,f0,f1,f2]
  CHECK(v[0] == 1.0);
  CHECK(v[3] == 1.0);
  CHECK(v[6] == 1.0);
  CHECK(v[9] == 2.0);
  CHECK(v[12] == 3.0);
}

TEST_CASE("motion descriptors for stationary objects are stable across frames") {
  ad::ParamStore ps;
  Rng rng(8);
  ad::Tensor& W = ps.create("W", {4, 3});
  ad::init_uniform(W, rng);
  ad::Tensor& b = ps.create("b", {4});
  ad::init_uniform(b, rng, 0.3);
  Projection p{&W, &b};

  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = 5;
  for (int f = 0; f < 5; ++f) {
    FrameFeatures ff;
    ff.motion = {0.0, 0.0, 0.0};
    cf.frames.push_back(ff);
  }
  ad::Tape t;
  ad::Var q = t.input({0.1, 0.2, -0.3, 0.4});
  const auto r = subject_score_t(t, p, cf, q, true, false);
  const double first = t.value(r.scores.per_frame[0]);
  for (const auto& s : r.scores.per_frame) CHECK(t.value(s) == doctest::Approx(first));
}

TEST_CASE("moving location module") {
  ad::ParamStore ps;
  Rng rng(12);
  const ad::LstmParams lstm = ad::make_lstm(ps, "mloc", 30, 6, rng);
  ad::Tensor& W = ps.create("out.W", {4, 30});
  ad::init_uniform(W, rng);
  ad::Tensor& b = ps.create("out.b", {4});
  Projection out{&W, &b};
  const std::vector<double> q{0.4, -0.1, 0.3, 0.2};

  SUBCASE("constant position gives identical per-frame scores") {
    std::vector<FrameFeatures> frames(7, frame_with_location({0.2, 0.2, 0.4, 0.4, 0.04}));
    const auto ms = moving_location_score(frames, q, lstm, out, ps);
    for (double v : ms.per_frame) CHECK(v == doctest::Approx(ms.per_frame[0]));
  }
  SUBCASE("reversing a motion sequence changes the score") {
    std::vector<std::vector<double>> steps;
    for (int k = 0; k < 5; ++k) {
      std::vector<double> s(30, 0.0);
      s[0] = 0.1 * k;
      s[2] = 0.1 * k + 0.2;
      steps.push_back(s);
    }
    ad::Tape t;
    ad::Var qv = t.input(q);
    const double fwd = t.value(moving_location_step(t, lstm, out, steps, qv));
    std::reverse(steps.begin(), steps.end());
    const double bwd = t.value(moving_location_step(t, lstm, out, steps, qv));
    CHECK(std::abs(fwd - bwd) > 1e-9);
  }
  SUBCASE("sequence length other than 5 is an error") {
    ad::Tape t;
    ad::Var qv = t.input(q);
    std::vector<std::vector<double>> steps(4, std::vector<double>(30, 0.0));
    CHECK_THROWS_AS(moving_location_step(t, lstm, out, steps, qv), Error);
  }
  SUBCASE("zero-length interval is an error") {
    CHECK_THROWS_AS(moving_location_score({}, q, lstm, out, ps), Error);
  }
}

TEST_CASE("moving location is not frame-permutation invariant while mean pooling is") {
  ad::ParamStore ps;
  Rng rng(13);
  const ad::LstmParams lstm = ad::make_lstm(ps, "mloc", 30, 6, rng);
  ad::Tensor& W = ps.create("out.W", {4, 30});
  ad::init_uniform(W, rng);
  Projection out{&W, nullptr};
  const std::vector<double> q{0.4, -0.1, 0.3, 0.2};

  std::vector<FrameFeatures> frames;
  for (int f = 0; f < 6; ++f)
    frames.push_back(frame_with_location(
        {0.1 * f, 0.05 * f, 0.1 * f + 0.2, 0.05 * f + 0.2, 0.04}));
  const double base = moving_location_score(frames, q, lstm, out, ps).score;
  std::reverse(frames.begin(), frames.end());
  const double rev = moving_location_score(frames, q, lstm, out, ps).score;
  CHECK(std::abs(base - rev) > 1e-9);
}
