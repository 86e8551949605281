#include "stvg/types.hpp"

#include <algorithm>

#include "stvg/errors.hpp"

namespace stvg {

bool DatasetSplit::disjoint() const {
  for (const auto& v : train)
    if (val.count(v) || test.count(v)) return false;
  for (const auto& v : val)
    if (test.count(v)) return false;
  return true;
}

const std::set<std::string>& DatasetSplit::of(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split name: " + name);
}

const VideoInfo* Dataset::video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

std::vector<const GroundingInstance*> Dataset::split_instances(const std::string& name) const {
  const auto& ids = split.of(name);
  std::vector<const GroundingInstance*> out;
  for (const auto& inst : instances)
    if (ids.count(inst.video_id)) out.push_back(&inst);
  return out;
}

double Dataset::mean_candidates() const {
  if (instances.empty()) return 0.0;
  double sum = 0;
  for (const auto& inst : instances) sum += static_cast<double>(inst.candidates.size());
  return sum / static_cast<double>(instances.size());
}

void validate_tubelet(const Tubelet& t, const std::string& field) {
  if (t.boxes.empty()) throw ValidationError(field, "tubelet has no frames");
  if (t.frame_start < 0) throw ValidationError(field, "frame_start negative");
  if (!t.confidence.empty() && t.confidence.size() != t.boxes.size())
    throw ValidationError(field, "confidence not parallel to boxes");
  for (double c : t.confidence)
    if (c < 0.0 || c > 1.0) throw ValidationError(field, "confidence outside [0,1]");
  for (const auto& b : t.boxes) {
    if (b.has_value() && !b->valid())
      throw ValidationError(field, "invalid box in tubelet " + t.object_id);
  }
  if (t.is_gt && !t.gap_free())
    throw ValidationError(field, "ground-truth tubelet " + t.object_id + " has gaps");
}

void validate_instance(const GroundingInstance& inst, const VideoInfo* video) {
  if (!inst.interval.valid()) throw ValidationError("interval", "interval must satisfy start < end");
  if (inst.expression.tokens.empty())
    throw ValidationError("expression", "expression has no tokens");
  if (inst.expression.tokens.size() != inst.expression.pos.size())
    throw ValidationError("expression", "pos tags not parallel to tokens");
  if (inst.candidates.size() < 2)
    throw ValidationError("candidates", "contrast set needs at least 2 candidates");
  if (inst.target_index < 0 || inst.target_index >= static_cast<int>(inst.candidates.size()))
    throw ValidationError("target_index", "target_index out of range");

  const std::string& cls = inst.candidates.front().class_label;
  for (const auto& cand : inst.candidates) {
    validate_tubelet(cand, "candidates");
    if (cand.class_label != cls)
      throw ValidationError("candidates", "candidates mix class labels ('" + cls + "' vs '" +
                                              cand.class_label + "')");
    if (!cand.covers(inst.interval))
      throw ValidationError("candidates",
                            "candidate " + cand.object_id + " does not cover the instance interval");
  }
  if (video) {
    if (inst.interval.end > video->n_frames)
      throw ValidationError("interval", "interval exceeds video length");
    for (const auto& cand : inst.candidates) {
      for (const auto& b : cand.boxes) {
        if (b.has_value() && (b->x_max > video->width || b->y_max > video->height))
          throw ValidationError("candidates", "box outside image bounds in " + cand.object_id);
      }
    }
  }
}

}  // namespace stvg
