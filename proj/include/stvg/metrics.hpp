#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stvg/types.hpp"

namespace stvg::metrics {

double box_iou(const BoundingBox& a, const BoundingBox& b);

// Fraction of union frames (frames where at least one tubelet has a box)
// whose per-frame box IoU is strictly above 0.5. Frames present on only one
// side count toward the denominator. Throws Error when there are no union
// frames at all.
double tubelet_iou(const Tubelet& pred, const Tubelet& gt);

// 1-D IoU over half-open frame intervals; contiguity not required.
double temporal_iou(const TemporalInterval& a, const TemporalInterval& b);

struct PerInstanceResult {
  std::string id;
  int predicted_index = -1;
  bool correct = false;
  bool missing_prediction = false;
  std::optional<double> tubelet_iou;
  std::optional<double> temporal_iou;
};

struct EvalReport {
  std::optional<double> accuracy;
  std::optional<double> map_tubelet_iou;
  std::optional<double> map_temporal_iou;
  std::optional<double> map_spatiotemporal;
  std::optional<double> average_precision;
  double random_expectation = 0.0;  // 1 / mean contrast-set size
  bool all_modules_disabled = false;
  std::vector<PerInstanceResult> per_instance;

  nlohmann::json to_json() const;
  std::string pretty() const;
};

double localization_accuracy(const std::vector<int>& predictions,
                             const std::vector<GroundingInstance>& instances);

EvalReport eval_localization(const std::vector<int>& predictions,
                             const std::vector<GroundingInstance>& instances);

// One predicted tubelet per instance; missing predictions count as incorrect
// and are flagged in per_instance.
EvalReport eval_tubelet_detection(const std::vector<std::optional<Tubelet>>& predictions,
                                  const std::vector<GroundingInstance>& instances,
                                  double iou_threshold = 0.5);

// Ranked interval predictions per instance; correct when any of the first
// top_k passes the threshold. Scores (second of pair) order the ranked list
// and feed the optional AP variant.
EvalReport eval_temporal(
    const std::vector<std::vector<std::pair<TemporalInterval, double>>>& predictions,
    const std::vector<GroundingInstance>& instances, double tiou_threshold = 0.5,
    int top_k = 1, bool with_ap = false);

// Two-step protocol: temporal IoU first, then tubelet IoU restricted to the
// frames of the *proposed* interval.
EvalReport eval_spatiotemporal(
    const std::vector<std::pair<TemporalInterval, Tubelet>>& predictions,
    const std::vector<GroundingInstance>& instances, double threshold = 0.5);

// Precision integrated over recall (no interpolation); each instance
// contributes exactly one positive. `scored_hits` is (score, hit) per
// prediction, any order.
double average_precision(std::vector<std::pair<double, bool>> scored_hits, int n_positives);

// Restriction of a tubelet to the frames of an interval.
Tubelet clip_tubelet(const Tubelet& t, const TemporalInterval& iv);

}  // namespace stvg::metrics
