#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace stvg {

// Axis-aligned box in image pixel coordinates, corners (x_min,y_min)-(x_max,y_max).
struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const {
    return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max;
  }
  bool operator==(const BoundingBox&) const = default;
};

// Half-open frame interval [start, end).
struct TemporalInterval {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool valid() const { return start >= 0 && start < end; }
  bool contains(int frame) const { return frame >= start && frame < end; }
  bool operator==(const TemporalInterval&) const = default;
  auto operator<=>(const TemporalInterval&) const = default;
};

// Per-frame box track of one object. boxes[k] corresponds to frame
// frame_start + k; an empty slot means the object was not visible / not
// detected in that frame. Ground-truth tubelets must be gap-free.
struct Tubelet {
  std::string object_id;
  std::string class_label;
  int frame_start = 0;
  std::vector<std::optional<BoundingBox>> boxes;
  std::vector<double> confidence;           // empty, or parallel to boxes
  std::vector<std::string> attributes;      // e.g. color words
  bool is_gt = true;

  int frame_end() const { return frame_start + static_cast<int>(boxes.size()) - 1; }

  const std::optional<BoundingBox>* box_at(int frame) const {
    int k = frame - frame_start;
    if (k < 0 || k >= static_cast<int>(boxes.size())) return nullptr;
    return &boxes[static_cast<size_t>(k)];
  }

  bool has_box(int frame) const {
    const auto* b = box_at(frame);
    return b && b->has_value();
  }

  bool gap_free() const {
    for (const auto& b : boxes)
      if (!b.has_value()) return false;
    return true;
  }

  // true when the track's frame range spans the whole interval
  bool covers(const TemporalInterval& iv) const {
    return frame_start <= iv.start && frame_end() >= iv.end - 1;
  }

  bool operator==(const Tubelet&) const = default;
};

// Tokenized identifying description with Penn Treebank POS tags.
struct Expression {
  std::string raw;
  std::vector<std::string> tokens;  // lowercase
  std::vector<std::string> pos;     // parallel to tokens

  bool operator==(const Expression&) const = default;
};

// One training/eval example: an expression, the candidate set (target plus
// same-class distractors), and the event interval.
struct GroundingInstance {
  std::string id;  // "<video_id>#<k>", assigned when loading/building
  std::string video_id;
  TemporalInterval interval;
  Expression expression;
  std::vector<Tubelet> candidates;
  int target_index = 0;
  std::set<std::string> attributes;  // target's attribute words

  const Tubelet& target() const { return candidates[static_cast<size_t>(target_index)]; }

  bool operator==(const GroundingInstance&) const = default;
};

struct VideoInfo {
  std::string id;
  int width = 0;
  int height = 0;
  int n_frames = 0;
  double fps = 30.0;
  std::string split;  // train | val | test

  bool operator==(const VideoInfo&) const = default;
};

struct DatasetSplit {
  std::set<std::string> train, val, test;

  bool disjoint() const;
  const std::set<std::string>& of(const std::string& name) const;
  bool operator==(const DatasetSplit&) const = default;
};

struct Dataset {
  std::vector<VideoInfo> videos;
  std::vector<GroundingInstance> instances;  // grouped by video, file order
  DatasetSplit split;

  const VideoInfo* video(const std::string& id) const;
  std::vector<const GroundingInstance*> split_instances(const std::string& name) const;
  double mean_candidates() const;

  bool operator==(const Dataset&) const = default;
};

// Throws ValidationError on the first violated invariant. `video` may be
// null when no video record is available (skips interval-bounds checks).
void validate_instance(const GroundingInstance& inst, const VideoInfo* video);

void validate_tubelet(const Tubelet& t, const std::string& field);

}  // namespace stvg
