#include "stvg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stvg/errors.hpp"

namespace stvg::metrics {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double tubelet_iou(const Tubelet& pred, const Tubelet& gt) {
  const int lo = std::min(pred.frame_start, gt.frame_start);
  const int hi = std::max(pred.frame_end(), gt.frame_end());
  int union_frames = 0;
  int hits = 0;
  for (int f = lo; f <= hi; ++f) {
    const bool p = pred.has_box(f);
    const bool g = gt.has_box(f);
    if (!p && !g) continue;
    ++union_frames;
    if (p && g && box_iou(**pred.box_at(f), **gt.box_at(f)) > 0.5) ++hits;
  }
  if (union_frames == 0) throw Error("empty tubelets");
  return static_cast<double>(hits) / static_cast<double>(union_frames);
}

double temporal_iou(const TemporalInterval& a, const TemporalInterval& b) {
  const double inter =
      std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double localization_accuracy(const std::vector<int>& predictions,
                             const std::vector<GroundingInstance>& instances) {
  if (instances.empty()) throw Error("empty instance list");
  if (predictions.size() != instances.size())
    throw Error("prediction count does not match instance count");
  int correct = 0;
  for (size_t i = 0; i < instances.size(); ++i)
    if (predictions[i] == instances[i].target_index) ++correct;
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

namespace {

double mean_candidates(const std::vector<GroundingInstance>& instances) {
  if (instances.empty()) return 0.0;
  double sum = 0;
  for (const auto& inst : instances) sum += static_cast<double>(inst.candidates.size());
  return sum / static_cast<double>(instances.size());
}

double random_expect(const std::vector<GroundingInstance>& instances) {
  const double k = mean_candidates(instances);
  return k > 0 ? 1.0 / k : 0.0;
}

}  // namespace

EvalReport eval_localization(const std::vector<int>& predictions,
                             const std::vector<GroundingInstance>& instances) {
  EvalReport rep;
  rep.random_expectation = random_expect(instances);
  rep.accuracy = localization_accuracy(predictions, instances);
  for (size_t i = 0; i < instances.size(); ++i) {
    PerInstanceResult r;
    r.id = instances[i].id;
    r.predicted_index = predictions[i];
    r.correct = predictions[i] == instances[i].target_index;
    rep.per_instance.push_back(std::move(r));
  }
  return rep;
}

EvalReport eval_tubelet_detection(const std::vector<std::optional<Tubelet>>& predictions,
                                  const std::vector<GroundingInstance>& instances,
                                  double iou_threshold) {
  if (predictions.size() != instances.size())
    throw Error("prediction count does not match instance count");
  EvalReport rep;
  rep.random_expectation = random_expect(instances);
  int correct = 0;
  for (size_t i = 0; i < instances.size(); ++i) {
    PerInstanceResult r;
    r.id = instances[i].id;
    if (!predictions[i].has_value()) {
      r.missing_prediction = true;
    } else {
      r.tubelet_iou = tubelet_iou(*predictions[i], instances[i].target());
      r.correct = *r.tubelet_iou > iou_threshold;
    }
    if (r.correct) ++correct;
    rep.per_instance.push_back(std::move(r));
  }
  rep.map_tubelet_iou =
      instances.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(instances.size());
  return rep;
}

EvalReport eval_temporal(
    const std::vector<std::vector<std::pair<TemporalInterval, double>>>& predictions,
    const std::vector<GroundingInstance>& instances, double tiou_threshold, int top_k,
    bool with_ap) {
  if (predictions.size() != instances.size())
    throw Error("prediction count does not match instance count");
  EvalReport rep;
  rep.random_expectation = random_expect(instances);
  int correct = 0;
  std::vector<std::pair<double, bool>> scored_hits;
  for (size_t i = 0; i < instances.size(); ++i) {
    PerInstanceResult r;
    r.id = instances[i].id;
    double best = 0.0;
    const auto& ranked = predictions[i];
    for (size_t k = 0; k < ranked.size(); ++k) {
      const double t = temporal_iou(ranked[k].first, instances[i].interval);
      scored_hits.emplace_back(ranked[k].second, t > tiou_threshold);
      if (static_cast<int>(k) < top_k) best = std::max(best, t);
    }
    if (ranked.empty()) r.missing_prediction = true;
    r.temporal_iou = best;
    r.correct = best > tiou_threshold;
    if (r.correct) ++correct;
    rep.per_instance.push_back(std::move(r));
  }
  rep.map_temporal_iou =
      instances.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(instances.size());
  if (with_ap)
    rep.average_precision =
        average_precision(std::move(scored_hits), static_cast<int>(instances.size()));
  return rep;
}

EvalReport eval_spatiotemporal(
    const std::vector<std::pair<TemporalInterval, Tubelet>>& predictions,
    const std::vector<GroundingInstance>& instances, double threshold) {
  if (predictions.size() != instances.size())
    throw Error("prediction count does not match instance count");
  EvalReport rep;
  rep.random_expectation = random_expect(instances);
  int correct = 0;
  for (size_t i = 0; i < instances.size(); ++i) {
    const auto& [interval, tube] = predictions[i];
    if (!tube.covers(interval))
      throw ValidationError("prediction",
                            "predicted tubelet does not span its interval (instance " +
                                instances[i].id + ")");
    PerInstanceResult r;
    r.id = instances[i].id;
    r.temporal_iou = temporal_iou(interval, instances[i].interval);
    if (*r.temporal_iou > threshold) {
      const Tubelet pred_clip = clip_tubelet(tube, interval);
      const Tubelet gt_clip = clip_tubelet(instances[i].target(), interval);
      double tiou = 0.0;
      try {
        tiou = tubelet_iou(pred_clip, gt_clip);
      } catch (const Error&) {
        tiou = 0.0;  // no union frames inside the proposal interval
      }
      r.tubelet_iou = tiou;
      r.correct = tiou > threshold;
    }
    if (r.correct) ++correct;
    rep.per_instance.push_back(std::move(r));
  }
  rep.map_spatiotemporal =
      instances.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(instances.size());
  return rep;
}

double average_precision(std::vector<std::pair<double, bool>> scored_hits, int n_positives) {
  if (n_positives <= 0) return 0.0;
  std::stable_sort(scored_hits.begin(), scored_hits.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  double ap = 0.0;
  int tp = 0;
  for (size_t k = 0; k < scored_hits.size(); ++k) {
    if (scored_hits[k].second) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(n_positives);
}

Tubelet clip_tubelet(const Tubelet& t, const TemporalInterval& iv) {
  Tubelet out;
  out.object_id = t.object_id;
  out.class_label = t.class_label;
  out.attributes = t.attributes;
  out.is_gt = false;  // clips may have gaps
  out.frame_start = std::max(t.frame_start, iv.start);
  const int last = std::min(t.frame_end(), iv.end - 1);
  for (int f = out.frame_start; f <= last; ++f) {
    const auto* b = t.box_at(f);
    out.boxes.push_back(b ? *b : std::nullopt);
    if (!t.confidence.empty())
      out.confidence.push_back(t.confidence[static_cast<size_t>(f - t.frame_start)]);
  }
  if (out.boxes.empty()) {
    // keep a single empty slot so frame bookkeeping stays valid
    out.frame_start = iv.start;
    out.boxes.push_back(std::nullopt);
    out.confidence.clear();
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  if (accuracy) j["accuracy"] = *accuracy;
  if (map_tubelet_iou) j["map_tubelet_iou"] = *map_tubelet_iou;
  if (map_temporal_iou) j["map_temporal_iou"] = *map_temporal_iou;
  if (map_spatiotemporal) j["map_spatiotemporal"] = *map_spatiotemporal;
  if (average_precision) j["average_precision"] = *average_precision;
  j["random_expectation"] = random_expectation;
  if (all_modules_disabled) j["all_modules_disabled"] = true;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : per_instance) {
    nlohmann::json jr{{"id", r.id}, {"correct", r.correct}};
    if (r.predicted_index >= 0) jr["predicted_index"] = r.predicted_index;
    if (r.missing_prediction) jr["missing_prediction"] = true;
    if (r.tubelet_iou) jr["tubelet_iou"] = *r.tubelet_iou;
    if (r.temporal_iou) jr["temporal_iou"] = *r.temporal_iou;
    per.push_back(std::move(jr));
  }
  j["per_instance"] = std::move(per);
  return j;
}

std::string EvalReport::pretty() const {
  std::ostringstream os;
  char buf[96];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "  %-22s %8.4f\n", name, v);
    os << buf;
  };
  os << "eval report (" << per_instance.size() << " instances)\n";
  if (accuracy) row("accuracy", *accuracy);
  if (map_tubelet_iou) row("tubelet IoU@0.5", *map_tubelet_iou);
  if (map_temporal_iou) row("temporal IoU@0.5", *map_temporal_iou);
  if (map_spatiotemporal) row("spatio-temporal@0.5", *map_spatiotemporal);
  if (average_precision) row("average precision", *average_precision);
  row("random expectation", random_expectation);
  if (all_modules_disabled) os << "  (all modules disabled: totals are constant)\n";
  return os.str();
}

}  // namespace stvg::metrics
