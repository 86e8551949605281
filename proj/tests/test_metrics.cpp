#include <doctest.h>

#include <cmath>

#include "stvg/errors.hpp"
#include "stvg/metrics.hpp"
#include "support/oracles.hpp"

using namespace stvg;
using namespace stvg::metrics;

namespace {

Tubelet make_tubelet(int start, const std::vector<std::optional<BoundingBox>>& boxes) {
  Tubelet t;
  t.object_id = "t";
  t.class_label = "object";
  t.frame_start = start;
  t.boxes = boxes;
  t.is_gt = false;
  return t;
}

GroundingInstance make_instance(const std::string& id, TemporalInterval iv, int target,
                                std::vector<Tubelet> cands) {
  GroundingInstance inst;
  inst.id = id;
  inst.video_id = "v";
  inst.interval = iv;
  inst.expression.raw = "the panda moves to the left";
  inst.expression.tokens = {"the", "panda", "moves", "to", "the", "left"};
  inst.expression.pos = {"DT", "NN", "VBZ", "IN", "DT", "NN"};
  inst.target_index = target;
  inst.candidates = std::move(cands);
  return inst;
}

const BoundingBox kBoxA{0, 0, 10, 10};
const BoundingBox kBoxShift{5, 5, 15, 15};
const BoundingBox kBoxFar{20, 20, 30, 30};

}  // namespace

TEST_CASE("box_iou hand cases") {
  CHECK(box_iou(kBoxA, kBoxA) == doctest::Approx(1.0));
  CHECK(box_iou(kBoxA, kBoxFar) == 0.0);
  // inter = 5x5 = 25, union = 100 + 100 - 25 = 175
  CHECK(box_iou(kBoxA, kBoxShift) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));
}

TEST_CASE("box_iou symmetry and bounds on random boxes") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    auto mk = [&] {
      const double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
      return BoundingBox{x, y, x + rng.uniform(1, 30), y + rng.uniform(1, 30)};
    };
    const BoundingBox a = mk(), b = mk();
    const double ab = box_iou(a, b);
    CHECK(ab == box_iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(std::abs(ab - oracle::box_iou_recount(a, b)) < 1e-12);
  }
}

TEST_CASE("tubelet_iou identical over 8 frames") {
  std::vector<std::optional<BoundingBox>> boxes(8, kBoxA);
  const Tubelet t = make_tubelet(0, boxes);
  CHECK(tubelet_iou(t, t) == 1.0);
}

TEST_CASE("tubelet_iou mixed-quality frames") {
  // frame 0 pair IoU 25/175 < 0.5 (miss), frame 1 identical (hit) -> 1/2
  const Tubelet pred = make_tubelet(0, {kBoxA, kBoxA});
  const Tubelet gt = make_tubelet(0, {kBoxShift, kBoxA});
  CHECK(tubelet_iou(pred, gt) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tubelet_iou over offset frame ranges") {
  // pred frames 0-3, gt frames 2-5, identical boxes on shared frames 2-3
  const Tubelet pred = make_tubelet(0, {kBoxA, kBoxA, kBoxA, kBoxA});
  const Tubelet gt = make_tubelet(2, {kBoxA, kBoxA, kBoxA, kBoxA});
  CHECK(tubelet_iou(pred, gt) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("tubelet_iou with no union frames is an error") {
  const Tubelet a = make_tubelet(0, {std::nullopt, std::nullopt});
  const Tubelet b = make_tubelet(0, {std::nullopt});
  CHECK_THROWS_WITH_AS(tubelet_iou(a, b), "empty tubelets", Error);
}

TEST_CASE("tubelet_iou matches brute-force recount on 1000 random instances") {
  Rng rng(2024);
  for (int checked = 0; checked < 1000; ++checked) {
    const Tubelet a = oracle::random_tubelet(rng, 6);
    const Tubelet b = oracle::random_tubelet(rng, 6);
    const auto expect = oracle::tubelet_iou_recount(a, b);
    if (!expect.has_value()) {
      CHECK_THROWS_AS(tubelet_iou(a, b), Error);
    } else {
      const double got = tubelet_iou(a, b);
      CHECK(std::abs(got - *expect) < 1e-12);
      CHECK(got == tubelet_iou(b, a));  // symmetry
    }
  }
}

TEST_CASE("temporal_iou hand cases") {
  CHECK(temporal_iou({0, 40}, {0, 40}) == 1.0);
  CHECK(temporal_iou({0, 10}, {20, 30}) == 0.0);
  CHECK(temporal_iou({0, 10}, {5, 15}) == doctest::Approx(5.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("temporal_iou identity iff equal, symmetry, random recount") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const int a0 = rng.uniform_int(30);
    const int b0 = rng.uniform_int(30);
    const TemporalInterval a{a0, a0 + 1 + rng.uniform_int(20)};
    const TemporalInterval b{b0, b0 + 1 + rng.uniform_int(20)};
    const double v = temporal_iou(a, b);
    CHECK(v == temporal_iou(b, a));
    CHECK(std::abs(v - oracle::temporal_iou_recount(a, b)) < 1e-12);
    if (v == 1.0) CHECK(a == b);
    if (a == b) CHECK(v == 1.0);
  }
}

TEST_CASE("localization accuracy") {
  std::vector<Tubelet> cands{make_tubelet(0, {kBoxA}), make_tubelet(0, {kBoxFar})};
  std::vector<GroundingInstance> insts;
  for (int i = 0; i < 4; ++i)
    insts.push_back(make_instance("i" + std::to_string(i), {0, 1}, i % 2, cands));

  CHECK(localization_accuracy({0, 1, 0, 1}, insts) == 1.0);
  CHECK(localization_accuracy({0, 0, 0, 0}, insts) == 0.5);
  CHECK_THROWS_AS(localization_accuracy({0, 1}, insts), Error);
  CHECK_THROWS_AS(localization_accuracy({}, {}), Error);
}

TEST_CASE("always-first predictor scores about 1/k on random targets") {
  Rng rng(77);
  const int k = 3;
  std::vector<GroundingInstance> insts;
  std::vector<int> preds;
  std::vector<Tubelet> cands;
  for (int c = 0; c < k; ++c) cands.push_back(make_tubelet(0, {kBoxA}));
  for (int i = 0; i < 4000; ++i) {
    insts.push_back(make_instance("i" + std::to_string(i), {0, 1}, rng.uniform_int(k), cands));
    preds.push_back(0);
  }
  const double acc = localization_accuracy(preds, insts);
  CHECK(acc == doctest::Approx(1.0 / k).epsilon(0.08));
}

TEST_CASE("eval_tubelet_detection protocol") {
  std::vector<std::optional<BoundingBox>> near(4, kBoxA);
  std::vector<std::optional<BoundingBox>> far(4, kBoxFar);
  const Tubelet target = make_tubelet(0, near);
  const Tubelet distractor = make_tubelet(0, far);
  std::vector<GroundingInstance> insts{
      make_instance("a", {0, 4}, 0, {target, distractor}),
      make_instance("b", {0, 4}, 0, {target, distractor}),
  };

  SUBCASE("exact predictions give 1.0") {
    std::vector<std::optional<Tubelet>> preds{target, target};
    CHECK(*eval_tubelet_detection(preds, insts).map_tubelet_iou == 1.0);
  }
  SUBCASE("zero-overlap distractor predictions give 0.0") {
    std::vector<std::optional<Tubelet>> preds{distractor, distractor};
    CHECK(*eval_tubelet_detection(preds, insts).map_tubelet_iou == 0.0);
  }
  SUBCASE("half exact half disjoint gives 0.5") {
    std::vector<std::optional<Tubelet>> preds{target, distractor};
    CHECK(*eval_tubelet_detection(preds, insts).map_tubelet_iou == 0.5);
  }
  SUBCASE("missing prediction counts incorrect and is flagged") {
    std::vector<std::optional<Tubelet>> preds{target, std::nullopt};
    const auto rep = eval_tubelet_detection(preds, insts);
    CHECK(*rep.map_tubelet_iou == 0.5);
    CHECK(rep.per_instance[1].missing_prediction);
  }
  SUBCASE("raising the threshold never raises the score") {
    const Tubelet part = make_tubelet(0, {kBoxA, kBoxShift, kBoxA, kBoxShift});
    std::vector<std::optional<Tubelet>> preds{part, target};
    double prev = 1.0;
    for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double v = *eval_tubelet_detection(preds, insts, thr).map_tubelet_iou;
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("eval_temporal protocol incl. top-k") {
  std::vector<Tubelet> cands{make_tubelet(0, {kBoxA}), make_tubelet(0, {kBoxFar})};
  std::vector<GroundingInstance> insts{make_instance("a", {0, 40}, 0, cands)};

  SUBCASE("exact interval gives 1.0") {
    CHECK(*eval_temporal({{{TemporalInterval{0, 40}, 0.9}}}, insts).map_temporal_iou == 1.0);
  }
  SUBCASE("interval shifted by its length gives 0.0") {
    CHECK(*eval_temporal({{{TemporalInterval{40, 80}, 0.9}}}, insts).map_temporal_iou == 0.0);
  }
  SUBCASE("hit in slot 4: top-1 misses, top-5 hits") {
    std::vector<std::pair<TemporalInterval, double>> ranked;
    for (int i = 0; i < 4; ++i)
      ranked.push_back({TemporalInterval{60 + i, 100 + i}, 0.9 - 0.1 * i});
    ranked.push_back({TemporalInterval{0, 40}, 0.1});
    CHECK(*eval_temporal({ranked}, insts, 0.5, 1).map_temporal_iou == 0.0);
    CHECK(*eval_temporal({ranked}, insts, 0.5, 5).map_temporal_iou == 1.0);
  }
}

TEST_CASE("eval_spatiotemporal two-step protocol") {
  std::vector<std::optional<BoundingBox>> boxes(40, kBoxA);
  const Tubelet target = make_tubelet(0, boxes);
  const Tubelet distractor =
      make_tubelet(0, std::vector<std::optional<BoundingBox>>(40, kBoxFar));
  std::vector<GroundingInstance> insts{make_instance("a", {0, 40}, 0, {target, distractor})};

  SUBCASE("exact interval and tubelet") {
    const auto rep = eval_spatiotemporal({{TemporalInterval{0, 40}, target}}, insts);
    CHECK(*rep.map_spatiotemporal == 1.0);
  }
  SUBCASE("exact tubelet but disjoint interval fails step 1") {
    std::vector<std::optional<BoundingBox>> late(40, kBoxA);
    const Tubelet shifted = make_tubelet(40, late);
    const auto rep = eval_spatiotemporal({{TemporalInterval{40, 80}, shifted}}, insts);
    CHECK(*rep.map_spatiotemporal == 0.0);
  }
  SUBCASE("tIoU 0.6 with 3/4 covered frames passing") {
    // proposal [10,50): tIoU vs gt [0,40) = 30/50 = 0.6; inside the proposal
    // the pred box matches on 30 frames and the gt is absent on 10 -> 30/40
    std::vector<std::optional<BoundingBox>> pb;
    for (int f = 10; f < 50; ++f) pb.push_back(f < 40 ? std::optional(kBoxA) : std::optional(kBoxFar));
    const Tubelet pred = make_tubelet(10, pb);
    const auto rep = eval_spatiotemporal({{TemporalInterval{10, 50}, pred}}, insts);
    CHECK(rep.per_instance[0].temporal_iou == doctest::Approx(0.6));
    CHECK(*rep.per_instance[0].tubelet_iou == doctest::Approx(30.0 / 40.0));
    CHECK(*rep.map_spatiotemporal == 1.0);
  }
  SUBCASE("tubelet not covering its interval is a validation error") {
    const Tubelet small = make_tubelet(0, {kBoxA, kBoxA});
    CHECK_THROWS_AS(eval_spatiotemporal({{TemporalInterval{0, 40}, small}}, insts),
                    ValidationError);
  }
}

TEST_CASE("average precision") {
  CHECK(average_precision({{0.9, true}, {0.8, false}}, 1) == doctest::Approx(1.0));
  CHECK(average_precision({{0.9, false}, {0.8, true}}, 1) == doctest::Approx(0.5));
  CHECK(average_precision({{0.9, true}, {0.8, false}, {0.7, true}}, 2) ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision({}, 0) == 0.0);
}
