#include "stvg/features.hpp"

#include <algorithm>
#include <cmath>

#include "stvg/errors.hpp"
#include "stvg/rng.hpp"

namespace stvg {

std::vector<BoundingBox> imputed_boxes(const Tubelet& t, int n_frames) {
  std::vector<std::optional<BoundingBox>> slots(static_cast<size_t>(n_frames));
  for (int f = std::max(0, t.frame_start); f <= t.frame_end() && f < n_frames; ++f) {
    const auto* b = t.box_at(f);
    if (b && b->has_value()) slots[static_cast<size_t>(f)] = **b;
  }
  std::vector<std::optional<BoundingBox>> filled = slots;
  std::optional<BoundingBox> last;
  for (int f = 0; f < n_frames; ++f) {
    if (slots[static_cast<size_t>(f)].has_value()) last = slots[static_cast<size_t>(f)];
    else if (last.has_value()) filled[static_cast<size_t>(f)] = last;
  }
  last.reset();
  for (int f = n_frames - 1; f >= 0; --f) {
    if (slots[static_cast<size_t>(f)].has_value()) last = slots[static_cast<size_t>(f)];
    else if (!filled[static_cast<size_t>(f)].has_value() && last.has_value())
      filled[static_cast<size_t>(f)] = last;
  }
  std::vector<BoundingBox> out;
  out.reserve(static_cast<size_t>(n_frames));
  for (const auto& b : filled) {
    if (!b.has_value()) throw Error("tubelet " + t.object_id + " has no boxes to impute from");
    out.push_back(*b);
  }
  return out;
}

namespace {

std::array<double, 5> location_vec(const BoundingBox& b, double W, double H) {
  return {b.x_min / W, b.y_min / H, b.x_max / W, b.y_max / H, b.area() / (W * H)};
}

std::array<double, 5> delta_vec(const BoundingBox& tgt, const BoundingBox& ctx, double W,
                                double H) {
  return {(tgt.x_min - ctx.x_min) / W, (tgt.y_min - ctx.y_min) / H,
          (tgt.x_max - ctx.x_max) / W, (tgt.y_max - ctx.y_max) / H,
          (tgt.area() - ctx.area()) / (W * H)};
}

// Center displacement between consecutive frames, normalized by image size.
std::array<double, 3> motion_vec(const std::vector<BoundingBox>& track, int frame, double W,
                                 double H) {
  if (frame <= 0) return {0.0, 0.0, 0.0};
  const BoundingBox& a = track[static_cast<size_t>(frame - 1)];
  const BoundingBox& b = track[static_cast<size_t>(frame)];
  const double dx = ((b.x_min - a.x_min) + (b.x_max - a.x_max)) * 0.5 / W;
  const double dy = ((b.y_min - a.y_min) + (b.y_max - a.y_max)) * 0.5 / H;
  return {dx, dy, std::sqrt(dx * dx + dy * dy)};
}

double center_dist(const BoundingBox& a, const BoundingBox& b) {
  const double dx = (a.x_min + a.x_max - b.x_min - b.x_max) * 0.5;
  const double dy = (a.y_min + a.y_max - b.y_min - b.y_max) * 0.5;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

BoxFeatureProvider::BoxFeatureProvider(std::vector<std::string> attribute_vocab,
                                       uint64_t noise_seed, double noise_sigma)
    : attribute_vocab_(std::move(attribute_vocab)),
      noise_seed_(noise_seed),
      noise_sigma_(noise_sigma) {}

std::vector<CandidateFeatures> BoxFeatureProvider::features(
    const VideoInfo& video, const GroundingInstance& inst) const {
  const double W = video.width;
  const double H = video.height;
  const int n = video.n_frames;
  const int n_cand = static_cast<int>(inst.candidates.size());

  // imputed full-video tracks per candidate
  std::vector<std::vector<BoundingBox>> tracks;
  tracks.reserve(static_cast<size_t>(n_cand));
  for (const auto& c : inst.candidates) tracks.push_back(imputed_boxes(c, n));

  // appearance = one-hot attribute + noise (same for every frame pre-noise)
  std::vector<std::vector<double>> base_app(static_cast<size_t>(n_cand));
  for (int i = 0; i < n_cand; ++i) {
    auto& a = base_app[static_cast<size_t>(i)];
    a.assign(attribute_vocab_.size(), 0.0);
    for (const auto& attr : inst.candidates[static_cast<size_t>(i)].attributes) {
      auto it = std::find(attribute_vocab_.begin(), attribute_vocab_.end(), attr);
      if (it != attribute_vocab_.end())
        a[static_cast<size_t>(it - attribute_vocab_.begin())] = 1.0;
    }
  }

  const int pad_lo = std::max(0, inst.interval.start - 2);
  const int pad_hi = std::min(n, inst.interval.end + 2);

  // context order: other candidates by mean center distance over the
  // interval, ties by candidate index; capped at five
  std::vector<std::vector<int>> ctx_order(static_cast<size_t>(n_cand));
  for (int i = 0; i < n_cand; ++i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n_cand; ++j) {
      if (j == i) continue;
      double sum = 0;
      for (int f = inst.interval.start; f < inst.interval.end; ++f)
        sum += center_dist(tracks[static_cast<size_t>(i)][static_cast<size_t>(f)],
                           tracks[static_cast<size_t>(j)][static_cast<size_t>(f)]);
      d.emplace_back(sum, j);
    }
    std::sort(d.begin(), d.end());
    auto& order = ctx_order[static_cast<size_t>(i)];
    for (const auto& [_, j] : d) {
      order.push_back(j);
      if (order.size() == 5) break;
    }
  }

  auto noise = [&](const std::string& object_id, int frame, int salt, int k) {
    std::vector<double> v(static_cast<size_t>(k));
    if (noise_sigma_ > 0) {
      Rng rng(mix64(mix64(noise_seed_, fnv1a64(video.id)),
                    mix64(fnv1a64(object_id), static_cast<uint64_t>(frame * 16 + salt))));
      for (auto& x : v) x = noise_sigma_ * rng.gaussian();
    }
    return v;
  };

  std::vector<CandidateFeatures> out(static_cast<size_t>(n_cand));
  for (int i = 0; i < n_cand; ++i) {
    CandidateFeatures& cf = out[static_cast<size_t>(i)];
    cf.first_frame = pad_lo;
    cf.core_begin = inst.interval.start - pad_lo;
    cf.core_count = inst.interval.length();
    const auto& track = tracks[static_cast<size_t>(i)];
    const std::string& oid = inst.candidates[static_cast<size_t>(i)].object_id;
    for (int f = pad_lo; f < pad_hi; ++f) {
      FrameFeatures ff;
      ff.appearance = base_app[static_cast<size_t>(i)];
      const auto app_noise = noise(oid, f, 0, appearance_dim());
      for (size_t k = 0; k < ff.appearance.size(); ++k) ff.appearance[k] += app_noise[k];
      const auto mv = motion_vec(track, f, W, H);
      ff.motion.assign(mv.begin(), mv.end());
      const auto mot_noise = noise(oid, f, 1, 3);
      for (size_t k = 0; k < 3; ++k) ff.motion[k] += mot_noise[k];
      ff.location = location_vec(track[static_cast<size_t>(f)], W, H);
      for (int j : ctx_order[static_cast<size_t>(i)]) {
        const auto& ctrack = tracks[static_cast<size_t>(j)];
        const std::string& cid = inst.candidates[static_cast<size_t>(j)].object_id;
        ff.deltas.push_back(delta_vec(track[static_cast<size_t>(f)],
                                      ctrack[static_cast<size_t>(f)], W, H));
        std::vector<double> capp = base_app[static_cast<size_t>(j)];
        const auto cn = noise(cid, f, 0, appearance_dim());
        for (size_t k = 0; k < capp.size(); ++k) capp[k] += cn[k];
        ff.ctx_appearance.push_back(std::move(capp));
        const auto cmv = motion_vec(ctrack, f, W, H);
        std::vector<double> cmot(cmv.begin(), cmv.end());
        const auto cmn = noise(cid, f, 1, 3);
        for (size_t k = 0; k < 3; ++k) cmot[k] += cmn[k];
        ff.ctx_motion.push_back(std::move(cmot));
      }
      cf.frames.push_back(std::move(ff));
    }
  }
  return out;
}

std::vector<double> BoxFeatureProvider::chunk_descriptor(const VideoInfo& video,
                                                         const std::vector<Tubelet>& objects,
                                                         const TemporalInterval& chunk) const {
  if (objects.empty()) throw Error("chunk_descriptor: no objects");
  const double W = video.width;
  const double H = video.height;
  std::vector<std::vector<BoundingBox>> tracks;
  for (const auto& o : objects) tracks.push_back(imputed_boxes(o, video.n_frames));

  double mean_mag = 0, max_mag = 0, mean_dx = 0, mean_dy = 0, moving = 0;
  int frames = 0;
  const double move_thresh = 1.0 / W;
  for (int f = chunk.start; f < chunk.end && f < video.n_frames; ++f) {
    double frame_max = 0;
    for (const auto& track : tracks) {
      const auto mv = motion_vec(track, f, W, H);
      mean_mag += mv[2];
      mean_dx += std::abs(mv[0]);
      mean_dy += std::abs(mv[1]);
      frame_max = std::max(frame_max, mv[2]);
      if (mv[2] > move_thresh) moving += 1.0;
    }
    max_mag = std::max(max_mag, frame_max);
    ++frames;
  }
  const double denom = static_cast<double>(frames) * static_cast<double>(tracks.size());
  std::vector<double> d{mean_mag / denom,
                        max_mag,
                        mean_dx / denom,
                        mean_dy / denom,
                        moving / denom,
                        static_cast<double>(tracks.size()) / 5.0};
  if (noise_sigma_ > 0) {
    Rng rng(mix64(mix64(noise_seed_, fnv1a64(video.id)),
                  mix64(static_cast<uint64_t>(chunk.start), static_cast<uint64_t>(chunk.end))));
    for (auto& x : d) x += 0.5 * noise_sigma_ * rng.gaussian();
  }
  return d;
}

}  // namespace stvg
