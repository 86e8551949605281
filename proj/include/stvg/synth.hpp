#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stvg/types.hpp"

namespace stvg::synth {

enum class Direction { kLeft, kRight, kUp, kDown, kStill };

const char* direction_name(Direction d);

// What one object does during one event window.
struct MotionProgram {
  Direction direction = Direction::kStill;
  double speed = 0.0;  // px/frame while the event is active
};

struct ObjectSpec {
  std::string attribute;  // color word
  BoundingBox start;      // box at frame 0 (size is fixed for the track)
  std::vector<MotionProgram> per_event;  // parallel to SceneSpec::events
};

struct SceneSpec {
  std::string video_id;
  std::string class_label = "panda";
  int width = 640;
  int height = 360;
  int n_frames = 120;
  double fps = 30.0;
  std::vector<TemporalInterval> events;  // shared ~40-frame windows
  std::vector<ObjectSpec> objects;       // 2..4, same class
  double box_jitter_sigma = 0.0;         // annotation jitter, px
};

struct Scene {
  SceneSpec spec;
  std::vector<Tubelet> tubelets;  // per object, full video, gap-free
};

// Deterministic trajectories; boxes are clamped to stay inside the image.
// Throws GenError when an object cannot fit.
Scene generate_scene(const SceneSpec& spec, uint64_t seed);

struct RealizedExpression {
  int object_index = 0;
  int event_index = 0;
  Expression expression;
  std::set<std::string> attributes;  // target color
};

// One expression per (object, event), each uniquely true of its object
// within the event and guaranteed to pass the grammatical validity check.
// Throws GenError when no distinguishing template exists.
std::vector<RealizedExpression> realize_expressions(const Scene& scene, uint64_t seed);

// True iff the expression's semantic claims hold for object `obj` in event
// `event_idx` of the scene (used by tests to recheck uniqueness).
bool expression_true_of(const Scene& scene, const Expression& expr, int obj, int event_idx);

struct GenOptions {
  std::string preset = "mixed";  // "motion": identical attributes, motion-only resolvable
  int n_videos = 30;
  uint64_t seed = 7;
  int width = 640;
  int height = 360;
  int n_frames = 120;
  int event_length = 40;
  int n_events = 2;
  int min_objects = 2;
  int max_objects = 4;
};

// Builds a full dataset with a video-level 12:1:2 split.
Dataset build_dataset(const GenOptions& opts);

// Instances whose candidates all carry identical attribute sets (resolvable
// only through motion or location).
int count_motion_only_instances(const Dataset& d);

}  // namespace stvg::synth
