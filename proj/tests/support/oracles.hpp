// Independent brute-force oracles. These deliberately re-derive every
// quantity from first principles and never call the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "stvg/rng.hpp"
#include "stvg/types.hpp"

namespace oracle {

inline double box_iou_recount(const stvg::BoundingBox& a, const stvg::BoundingBox& b) {
  const double x0 = std::max(a.x_min, b.x_min);
  const double y0 = std::max(a.y_min, b.y_min);
  const double x1 = std::min(a.x_max, b.x_max);
  const double y1 = std::min(a.y_max, b.y_max);
  double inter = 0.0;
  if (x1 > x0 && y1 > y0) inter = (x1 - x0) * (y1 - y0);
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Frame-by-frame recount over an enlarged frame range.
inline std::optional<double> tubelet_iou_recount(const stvg::Tubelet& p,
                                                 const stvg::Tubelet& g) {
  const int lo = std::min(p.frame_start, g.frame_start) - 3;
  const int hi = std::max(p.frame_end(), g.frame_end()) + 3;
  int n_union = 0, n_hit = 0;
  for (int f = lo; f <= hi; ++f) {
    const std::optional<stvg::BoundingBox>* pb = p.box_at(f);
    const std::optional<stvg::BoundingBox>* gb = g.box_at(f);
    const bool has_p = pb && pb->has_value();
    const bool has_g = gb && gb->has_value();
    if (!has_p && !has_g) continue;
    ++n_union;
    if (has_p && has_g && box_iou_recount(**pb, **gb) > 0.5) ++n_hit;
  }
  if (n_union == 0) return std::nullopt;
  return static_cast<double>(n_hit) / n_union;
}

// Temporal IoU by per-frame membership counting.
inline double temporal_iou_recount(const stvg::TemporalInterval& a,
                                   const stvg::TemporalInterval& b) {
  const int lo = std::min(a.start, b.start);
  const int hi = std::max(a.end, b.end);
  int inter = 0, uni = 0;
  for (int f = lo; f < hi; ++f) {
    const bool in_a = f >= a.start && f < a.end;
    const bool in_b = f >= b.start && f < b.end;
    if (in_a && in_b) ++inter;
    if (in_a || in_b) ++uni;
  }
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

// Random small tubelets (<= max_frames frames, boxes may be absent).
inline stvg::Tubelet random_tubelet(stvg::Rng& rng, int max_frames, bool allow_gaps = true) {
  stvg::Tubelet t;
  t.object_id = "r";
  t.class_label = "object";
  t.is_gt = false;
  t.frame_start = rng.uniform_int(4);
  const int n = 1 + rng.uniform_int(max_frames);
  for (int i = 0; i < n; ++i) {
    if (allow_gaps && rng.uniform() < 0.25) {
      t.boxes.push_back(std::nullopt);
    } else {
      const double x = rng.uniform(0, 50);
      const double y = rng.uniform(0, 50);
      t.boxes.push_back(stvg::BoundingBox{x, y, x + rng.uniform(1, 30), y + rng.uniform(1, 30)});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Exhaustive best-path oracle for tubelet linking. Enumerates every
// frame-consecutive path (any start, any end, one live box per frame),
// applies the same total order (score desc, start asc, boxes lexicographic)
// and returns the winner.

struct OraclePath {
  double score = 0.0;
  int start = 0;
  std::vector<int> boxes;
};

struct OracleDets {
  // conf[f][b] < 0 marks a removed box
  std::vector<std::vector<stvg::BoundingBox>> boxes;
  std::vector<std::vector<double>> conf;
};

inline bool oracle_better(const OraclePath& a, const OraclePath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.start != b.start) return a.start < b.start;
  return std::lexicographical_compare(a.boxes.begin(), a.boxes.end(), b.boxes.begin(),
                                      b.boxes.end());
}

inline void extend_paths(const OracleDets& d, double link_iou, int frame,
                         OraclePath cur, std::vector<OraclePath>& all) {
  all.push_back(cur);
  const int n_frames = static_cast<int>(d.boxes.size());
  if (frame + 1 >= n_frames) return;
  const auto& next = d.boxes[static_cast<size_t>(frame + 1)];
  for (int b = 0; b < static_cast<int>(next.size()); ++b) {
    if (d.conf[static_cast<size_t>(frame + 1)][static_cast<size_t>(b)] < 0) continue;
    const auto& prev_box =
        d.boxes[static_cast<size_t>(frame)][static_cast<size_t>(cur.boxes.back())];
    if (box_iou_recount(prev_box, next[static_cast<size_t>(b)]) < link_iou) continue;
    OraclePath p = cur;
    p.score += d.conf[static_cast<size_t>(frame + 1)][static_cast<size_t>(b)];
    p.boxes.push_back(b);
    extend_paths(d, link_iou, frame + 1, std::move(p), all);
  }
}

inline std::optional<OraclePath> best_path_oracle(const OracleDets& d, double link_iou) {
  std::vector<OraclePath> all;
  for (int f = 0; f < static_cast<int>(d.boxes.size()); ++f) {
    for (int b = 0; b < static_cast<int>(d.boxes[static_cast<size_t>(f)].size()); ++b) {
      if (d.conf[static_cast<size_t>(f)][static_cast<size_t>(b)] < 0) continue;
      OraclePath p;
      p.score = d.conf[static_cast<size_t>(f)][static_cast<size_t>(b)];
      p.start = f;
      p.boxes = {b};
      extend_paths(d, link_iou, f, p, all);
    }
  }
  std::optional<OraclePath> best;
  for (const auto& p : all) {
    if (p.score <= 0.0) continue;
    if (!best || oracle_better(p, *best)) best = p;
  }
  return best;
}

// Greedy extract-and-remove using the exhaustive single-path oracle.
inline std::vector<OraclePath> link_oracle(OracleDets d, double link_iou, int max_tubelets) {
  std::vector<OraclePath> out;
  for (int round = 0; round < max_tubelets; ++round) {
    auto best = best_path_oracle(d, link_iou);
    if (!best) break;
    for (size_t k = 0; k < best->boxes.size(); ++k)
      d.conf[static_cast<size_t>(best->start + static_cast<int>(k))]
            [static_cast<size_t>(best->boxes[k])] = -1.0;
    out.push_back(std::move(*best));
  }
  return out;
}

// Closed-form window count per scale.
inline int window_count_closed_form(int n_frames, int base, int stride, int n_scales) {
  int total = 0;
  int len = base;
  for (int k = 0; k < n_scales; ++k) {
    if (len > n_frames) break;
    total += (n_frames - len) / stride + 1;
    len *= 2;
  }
  return total;
}

}  // namespace oracle
