#include "stvg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "stvg/chunker.hpp"
#include "stvg/errors.hpp"
#include "stvg/rng.hpp"

namespace stvg::synth {

namespace {

constexpr double kFastSpeed = 4.0;  // speed class boundary for quickly/slowly

const std::array<const char*, 6> kColors = {"red", "blue", "green", "yellow", "white", "black"};
const std::array<const char*, 6> kClasses = {"panda", "player", "dog", "cat", "bear", "fox"};
const std::array<const char*, 3> kMoveVerbs = {"moves", "runs", "slides"};

struct Step {
  double dx = 0, dy = 0;
};

Step direction_step(Direction d, double speed) {
  switch (d) {
    case Direction::kLeft: return {-speed, 0};
    case Direction::kRight: return {speed, 0};
    case Direction::kUp: return {0, -speed};
    case Direction::kDown: return {0, speed};
    case Direction::kStill: return {0, 0};
  }
  return {};
}

const char* direction_noun(Direction d) {
  switch (d) {
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
    case Direction::kUp: return "top";
    case Direction::kDown: return "bottom";
    case Direction::kStill: return nullptr;
  }
  return nullptr;
}

// Semantic claims carried by a realized expression.
struct Claims {
  std::string color;
  bool still = false;
  std::optional<Direction> direction;
  std::optional<bool> fast;
};

bool claims_match(const Claims& c, const ObjectSpec& obj, int event_idx) {
  if (!c.color.empty() && obj.attribute != c.color) return false;
  const MotionProgram& mp = obj.per_event[static_cast<size_t>(event_idx)];
  if (c.still && mp.direction != Direction::kStill) return false;
  if (c.direction.has_value() &&
      (mp.direction != *c.direction || mp.speed <= 0.0)) return false;
  if (c.fast.has_value() && (mp.speed >= kFastSpeed) != *c.fast) return false;
  return true;
}

bool uniquely_true(const Claims& c, const SceneSpec& spec, int target, int event_idx) {
  for (int i = 0; i < static_cast<int>(spec.objects.size()); ++i) {
    const bool m = claims_match(c, spec.objects[static_cast<size_t>(i)], event_idx);
    if (i == target && !m) return false;
    if (i != target && m) return false;
  }
  return true;
}

struct Surface {
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
};

void append(Surface& s, const std::string& tok, const std::string& tag) {
  s.tokens.push_back(tok);
  s.pos.push_back(tag);
}

Surface realize_surface(const Claims& c, const std::string& noun, Rng& rng) {
  Surface s;
  append(s, "the", "DT");
  append(s, c.color, "JJ");
  append(s, noun, "NN");
  if (c.still) {
    append(s, rng.uniform_int(2) == 0 ? "remains" : "stays", "VBZ");
    append(s, "in", "IN");
    append(s, "place", "NN");
    return s;
  }
  const std::string verb = kMoveVerbs[static_cast<size_t>(rng.uniform_int(3))];
  const bool with_conj = !c.fast.has_value() && rng.uniform_int(4) == 0;
  const bool preverbal_adv = c.fast.has_value() && rng.uniform_int(3) == 0;
  const bool with_side = rng.uniform_int(2) == 0;
  if (with_conj) {
    append(s, "starts", "VBZ");
    append(s, "then", "RB");
  }
  if (preverbal_adv) append(s, *c.fast ? "quickly" : "slowly", "RB");
  append(s, verb, "VBZ");
  if (c.fast.has_value() && !preverbal_adv)
    append(s, *c.fast ? "quickly" : "slowly", "RB");
  append(s, "to", "IN");
  append(s, "the", "DT");
  append(s, direction_noun(*c.direction), "NN");
  if (with_side) append(s, "side", "NN");
  return s;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Parses the claims back out of a template expression (test support).
Claims parse_claims(const Expression& e) {
  Claims c;
  for (size_t i = 0; i < e.tokens.size(); ++i) {
    const std::string& t = e.tokens[i];
    if (e.pos[i] == "JJ") c.color = t;
    if (t == "remains" || t == "stays") c.still = true;
    if (t == "left") c.direction = Direction::kLeft;
    if (t == "right") c.direction = Direction::kRight;
    if (t == "top") c.direction = Direction::kUp;
    if (t == "bottom") c.direction = Direction::kDown;
    if (t == "quickly") c.fast = true;
    if (t == "slowly") c.fast = false;
  }
  return c;
}

}  // namespace

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kStill: return "still";
  }
  return "?";
}

Scene generate_scene(const SceneSpec& spec, uint64_t seed) {
  if (spec.objects.size() < 2) throw GenError("scene needs at least 2 objects");
  if (spec.events.empty()) throw GenError("scene needs at least one event");
  for (const auto& ev : spec.events)
    if (!ev.valid() || ev.end > spec.n_frames) throw GenError("event outside video bounds");

  Scene scene;
  scene.spec = spec;
  for (int oi = 0; oi < static_cast<int>(spec.objects.size()); ++oi) {
    const ObjectSpec& obj = spec.objects[static_cast<size_t>(oi)];
    if (obj.per_event.size() != spec.events.size())
      throw GenError("object motion programs not parallel to events");
    const double w = obj.start.width();
    const double h = obj.start.height();
    if (w <= 0 || h <= 0 || w > spec.width || h > spec.height)
      throw GenError("objects too large to fit");

    Rng jitter_rng(mix64(seed, static_cast<uint64_t>(oi) + 101));
    Tubelet t;
    t.object_id = spec.video_id + "_o" + std::to_string(oi);
    t.class_label = spec.class_label;
    t.frame_start = 0;
    t.attributes = {obj.attribute};
    t.is_gt = true;

    double x = obj.start.x_min;
    double y = obj.start.y_min;
    for (int f = 0; f < spec.n_frames; ++f) {
      if (f > 0) {
        // movement happens on transitions inside an event window
        for (size_t e = 0; e < spec.events.size(); ++e) {
          const auto& ev = spec.events[e];
          if (f > ev.start && f < ev.end) {
            const Step st = direction_step(obj.per_event[e].direction, obj.per_event[e].speed);
            x += st.dx;
            y += st.dy;
          }
        }
      }
      x = std::clamp(x, 0.0, static_cast<double>(spec.width) - w);
      y = std::clamp(y, 0.0, static_cast<double>(spec.height) - h);
      double bx = x, by = y;
      if (spec.box_jitter_sigma > 0) {
        bx = std::clamp(x + spec.box_jitter_sigma * jitter_rng.gaussian(), 0.0,
                        static_cast<double>(spec.width) - w);
        by = std::clamp(y + spec.box_jitter_sigma * jitter_rng.gaussian(), 0.0,
                        static_cast<double>(spec.height) - h);
      }
      t.boxes.push_back(BoundingBox{bx, by, bx + w, by + h});
    }
    scene.tubelets.push_back(std::move(t));
  }
  return scene;
}

std::vector<RealizedExpression> realize_expressions(const Scene& scene, uint64_t seed) {
  const SceneSpec& spec = scene.spec;
  std::vector<RealizedExpression> out;
  for (int e = 0; e < static_cast<int>(spec.events.size()); ++e) {
    for (int o = 0; o < static_cast<int>(spec.objects.size()); ++o) {
      const ObjectSpec& obj = spec.objects[static_cast<size_t>(o)];
      const MotionProgram& mp = obj.per_event[static_cast<size_t>(e)];

      Claims base;
      base.color = obj.attribute;
      if (mp.direction == Direction::kStill) {
        base.still = true;
      } else {
        base.direction = mp.direction;
      }
      Claims with_speed = base;
      if (!base.still) with_speed.fast = mp.speed >= kFastSpeed;

      Claims chosen;
      if (uniquely_true(base, spec, o, e)) {
        chosen = base;
      } else if (!base.still && uniquely_true(with_speed, spec, o, e)) {
        chosen = with_speed;
      } else {
        throw GenError("no distinguishing template for object " + std::to_string(o) +
                       " in event " + std::to_string(e) + " of " + spec.video_id);
      }

      Rng rng(mix64(seed, static_cast<uint64_t>(e * 16 + o)));
      const Surface s = realize_surface(chosen, spec.class_label, rng);
      RealizedExpression r;
      r.object_index = o;
      r.event_index = e;
      r.expression.tokens = s.tokens;
      r.expression.pos = s.pos;
      r.expression.raw = join(s.tokens);
      r.attributes = {obj.attribute};
      const auto verdict = chunk::validate(r.expression);
      if (!verdict.valid)
        throw GenError("realized expression failed grammatical validation: " +
                       r.expression.raw);
      out.push_back(std::move(r));
    }
  }
  return out;
}

bool expression_true_of(const Scene& scene, const Expression& expr, int obj, int event_idx) {
  const Claims c = parse_claims(expr);
  return claims_match(c, scene.spec.objects[static_cast<size_t>(obj)], event_idx);
}

namespace {

SceneSpec sample_spec(const GenOptions& opts, const std::string& video_id, Rng& rng) {
  SceneSpec spec;
  spec.video_id = video_id;
  spec.class_label = kClasses[static_cast<size_t>(rng.uniform_int(kClasses.size()))];
  spec.width = opts.width;
  spec.height = opts.height;
  spec.n_frames = opts.n_frames;

  const int n_obj = opts.min_objects + rng.uniform_int(opts.max_objects - opts.min_objects + 1);

  const int seg = opts.n_frames / opts.n_events;
  for (int e = 0; e < opts.n_events; ++e) {
    const int slack = seg - opts.event_length - 8;
    if (slack < 0) throw GenError("video too short for events");
    const int start = e * seg + 4 + rng.uniform_int(slack + 1);
    spec.events.push_back({start, start + opts.event_length});
  }

  // directions per event: distinct across objects; usually include one still
  std::vector<std::vector<Direction>> event_dirs;
  for (int e = 0; e < opts.n_events; ++e) {
    std::vector<Direction> moving{Direction::kLeft, Direction::kRight, Direction::kUp,
                                  Direction::kDown};
    rng.shuffle(moving);
    std::vector<Direction> dirs;
    if (rng.uniform_int(4) != 0) dirs.push_back(Direction::kStill);
    for (const Direction d : moving) {
      if (static_cast<int>(dirs.size()) >= n_obj) break;
      dirs.push_back(d);
    }
    while (static_cast<int>(dirs.size()) < n_obj) dirs.push_back(Direction::kStill);
    rng.shuffle(dirs);
    event_dirs.push_back(std::move(dirs));
  }

  const std::string shared_color = kColors[static_cast<size_t>(rng.uniform_int(kColors.size()))];
  for (int o = 0; o < n_obj; ++o) {
    ObjectSpec obj;
    obj.attribute = opts.preset == "motion"
                        ? shared_color
                        : kColors[static_cast<size_t>(rng.uniform_int(kColors.size()))];
    const double w = 50 + rng.uniform_int(31);
    const double h = 50 + rng.uniform_int(31);
    for (int e = 0; e < opts.n_events; ++e) {
      MotionProgram mp;
      mp.direction = event_dirs[static_cast<size_t>(e)][static_cast<size_t>(o)];
      mp.speed = mp.direction == Direction::kStill ? 0.0 : 2.0 + rng.uniform_int(4);
      obj.per_event.push_back(mp);
    }
    // feasible start so the full trajectory stays inside the image
    double cx = 0, cy = 0, min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    for (int f = 1; f < spec.n_frames; ++f) {
      for (size_t e = 0; e < spec.events.size(); ++e) {
        const auto& ev = spec.events[e];
        if (f > ev.start && f < ev.end) {
          const Step st = direction_step(obj.per_event[e].direction, obj.per_event[e].speed);
          cx += st.dx;
          cy += st.dy;
        }
      }
      min_x = std::min(min_x, cx);
      max_x = std::max(max_x, cx);
      min_y = std::min(min_y, cy);
      max_y = std::max(max_y, cy);
    }
    const double x_lo = -min_x;
    const double x_hi = spec.width - w - max_x;
    const double y_lo = -min_y;
    const double y_hi = spec.height - h - max_y;
    if (x_lo > x_hi || y_lo > y_hi) throw GenError("trajectory does not fit");
    const double x = rng.uniform(x_lo, x_hi);
    const double y = rng.uniform(y_lo, y_hi);
    obj.start = {x, y, x + w, y + h};
    spec.objects.push_back(std::move(obj));
  }
  return spec;
}

}  // namespace

Dataset build_dataset(const GenOptions& opts) {
  if (opts.n_videos < 15) throw ConfigError("need at least 15 videos for a 12:1:2 split");
  Dataset d;
  for (int v = 0; v < opts.n_videos; ++v) {
    const std::string vid = "v" + std::to_string(v);
    Scene scene;
    std::vector<RealizedExpression> reals;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      const uint64_t scene_seed = mix64(opts.seed, static_cast<uint64_t>(v * 128 + attempt));
      Rng rng(scene_seed);
      try {
        const SceneSpec spec = sample_spec(opts, vid, rng);
        scene = generate_scene(spec, scene_seed);
        reals = realize_expressions(scene, mix64(scene_seed, 7));
        ok = true;
      } catch (const GenError&) {
        continue;
      }
    }
    if (!ok) throw GenError("could not generate a valid scene for " + vid);

    VideoInfo info;
    info.id = vid;
    info.width = scene.spec.width;
    info.height = scene.spec.height;
    info.n_frames = scene.spec.n_frames;
    info.fps = scene.spec.fps;
    d.videos.push_back(info);

    int k = 0;
    for (const auto& r : reals) {
      GroundingInstance inst;
      inst.id = vid + "#" + std::to_string(k++);
      inst.video_id = vid;
      inst.interval = scene.spec.events[static_cast<size_t>(r.event_index)];
      inst.expression = r.expression;
      inst.candidates = scene.tubelets;
      inst.target_index = r.object_index;
      inst.attributes = r.attributes;
      d.instances.push_back(std::move(inst));
    }
  }

  // video-level split at a rough 12:1:2 ratio, each split non-empty
  std::vector<int> order(static_cast<size_t>(opts.n_videos));
  for (int i = 0; i < opts.n_videos; ++i) order[static_cast<size_t>(i)] = i;
  Rng split_rng(mix64(opts.seed, 0x5917));
  split_rng.shuffle(order);
  const int n_test = std::max(1, static_cast<int>(std::lround(opts.n_videos * 2.0 / 15.0)));
  const int n_val = std::max(1, static_cast<int>(std::lround(opts.n_videos * 1.0 / 15.0)));
  for (int i = 0; i < opts.n_videos; ++i) {
    const std::string vid = "v" + std::to_string(order[static_cast<size_t>(i)]);
    std::string split;
    if (i < n_test) split = "test";
    else if (i < n_test + n_val) split = "val";
    else split = "train";
    for (auto& vinfo : d.videos)
      if (vinfo.id == vid) vinfo.split = split;
    if (split == "test") d.split.test.insert(vid);
    else if (split == "val") d.split.val.insert(vid);
    else d.split.train.insert(vid);
  }

  for (const auto& inst : d.instances) validate_instance(inst, d.video(inst.video_id));
  return d;
}

int count_motion_only_instances(const Dataset& d) {
  int n = 0;
  for (const auto& inst : d.instances) {
    bool same = true;
    const auto& first = inst.candidates.front().attributes;
    for (const auto& c : inst.candidates)
      if (c.attributes != first) same = false;
    if (same) ++n;
  }
  return n;
}

}  // namespace stvg::synth
