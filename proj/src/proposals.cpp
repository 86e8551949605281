#include "stvg/proposals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "stvg/errors.hpp"
#include "stvg/metrics.hpp"

namespace stvg::proposals {

using nlohmann::json;

void FrameDetections::normalize() {
  for (auto& frame : frames) {
    std::stable_sort(frame.begin(), frame.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.confidence > b.confidence;
                     });
    if (frame.size() > 300) frame.resize(300);
  }
}

namespace {

struct Cell {
  double score = 0.0;
  int start = 0;
  int parent = -1;  // box index in previous frame, -1 = path starts here
  bool alive = false;
};

// box-index path from `start` to frame f inclusive
std::vector<int> reconstruct(const std::vector<std::vector<Cell>>& dp, int f, int b) {
  std::vector<int> path;
  while (f >= 0 && b >= 0) {
    path.push_back(b);
    const int pb = dp[static_cast<size_t>(f)][static_cast<size_t>(b)].parent;
    --f;
    b = pb;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// total order on candidate paths: score desc, start asc, boxes lexicographic
bool path_better(double score_a, int start_a, const std::vector<int>& boxes_a, double score_b,
                 int start_b, const std::vector<int>& boxes_b) {
  if (score_a != score_b) return score_a > score_b;
  if (start_a != start_b) return start_a < start_b;
  return std::lexicographical_compare(boxes_a.begin(), boxes_a.end(), boxes_b.begin(),
                                      boxes_b.end());
}

}  // namespace

std::vector<Tubelet> link_tubelets(const FrameDetections& dets, double link_iou,
                                   int max_tubelets, const std::string& class_label) {
  const int n_frames = static_cast<int>(dets.frames.size());
  std::vector<Tubelet> out;
  if (n_frames == 0) return out;

  std::vector<std::vector<bool>> used(static_cast<size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f)
    used[static_cast<size_t>(f)].assign(dets.frames[static_cast<size_t>(f)].size(), false);

  for (int round = 0; round < max_tubelets; ++round) {
    std::vector<std::vector<Cell>> dp(static_cast<size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) {
      const auto& frame = dets.frames[static_cast<size_t>(f)];
      dp[static_cast<size_t>(f)].assign(frame.size(), Cell{});
      for (int b = 0; b < static_cast<int>(frame.size()); ++b) {
        if (used[static_cast<size_t>(f)][static_cast<size_t>(b)]) continue;
        Cell cell;
        cell.alive = true;
        cell.score = frame[static_cast<size_t>(b)].confidence;
        cell.start = f;
        cell.parent = -1;
        if (f > 0) {
          const auto& prev = dets.frames[static_cast<size_t>(f - 1)];
          for (int pb = 0; pb < static_cast<int>(prev.size()); ++pb) {
            const Cell& pc = dp[static_cast<size_t>(f - 1)][static_cast<size_t>(pb)];
            if (!pc.alive) continue;
            if (metrics::box_iou(prev[static_cast<size_t>(pb)].box,
                                 frame[static_cast<size_t>(b)].box) < link_iou)
              continue;
            const double ext = pc.score + frame[static_cast<size_t>(b)].confidence;
            bool better = false;
            if (ext != cell.score) {
              better = ext > cell.score;
            } else if (pc.start != cell.start) {
              better = pc.start < cell.start;
            } else {
              // same score and start: prefer the lexicographically smaller
              // prefix (self-start has the empty prefix and wins only via
              // the start rule above, so both sides here are extensions)
              auto cand = reconstruct(dp, f - 1, pb);
              std::vector<int> cur;
              if (cell.parent >= 0) cur = reconstruct(dp, f - 1, cell.parent);
              better = cell.parent >= 0 &&
                       std::lexicographical_compare(cand.begin(), cand.end(), cur.begin(),
                                                    cur.end());
            }
            if (better) {
              cell.score = ext;
              cell.start = pc.start;
              cell.parent = pb;
            }
          }
        }
        dp[static_cast<size_t>(f)][static_cast<size_t>(b)] = cell;
      }
    }

    // best terminal over all cells
    double best_score = 0.0;
    int best_f = -1, best_b = -1;
    std::vector<int> best_path;
    for (int f = 0; f < n_frames; ++f) {
      for (int b = 0; b < static_cast<int>(dp[static_cast<size_t>(f)].size()); ++b) {
        const Cell& c = dp[static_cast<size_t>(f)][static_cast<size_t>(b)];
        if (!c.alive || c.score <= 0.0) continue;
        if (best_f < 0) {
          best_score = c.score;
          best_f = f;
          best_b = b;
          best_path = reconstruct(dp, f, b);
          continue;
        }
        if (c.score < best_score) continue;
        auto cand = reconstruct(dp, f, b);
        if (path_better(c.score, c.start, cand, best_score,
                        dp[static_cast<size_t>(best_f)][static_cast<size_t>(best_b)].start,
                        best_path)) {
          best_score = c.score;
          best_f = f;
          best_b = b;
          best_path = std::move(cand);
        }
      }
    }
    if (best_f < 0) break;  // no positive-score path remains

    const int start = best_f - static_cast<int>(best_path.size()) + 1;
    Tubelet t;
    t.object_id = "tube" + std::to_string(out.size());
    t.class_label = class_label;
    t.frame_start = dets.first_frame + start;
    t.is_gt = false;
    for (size_t k = 0; k < best_path.size(); ++k) {
      const int f = start + static_cast<int>(k);
      const Detection& d =
          dets.frames[static_cast<size_t>(f)][static_cast<size_t>(best_path[k])];
      t.boxes.push_back(d.box);
      t.confidence.push_back(d.confidence);
      used[static_cast<size_t>(f)][static_cast<size_t>(best_path[k])] = true;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TemporalInterval> enumerate_windows(int n_frames, int base_length, int stride,
                                                int n_scales) {
  if (base_length <= 0 || stride <= 0 || n_scales <= 0)
    throw ConfigError("enumerate_windows: positive base_length, stride, n_scales required");
  std::vector<TemporalInterval> out;
  if (base_length > n_frames) {
    std::cerr << "warning: base window length " << base_length << " exceeds video length "
              << n_frames << "; no windows\n";
    return out;
  }
  int len = base_length;
  for (int k = 0; k < n_scales; ++k) {
    if (len > n_frames) break;
    for (int start = 0; start + len <= n_frames; start += stride)
      out.push_back({start, start + len});
    len *= 2;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<TemporalInterval> window_chunks(const TemporalInterval& w, int chunk_len) {
  std::vector<TemporalInterval> out;
  for (int s = w.start; s + chunk_len <= w.end; s += chunk_len)
    out.push_back({s, s + chunk_len});
  return out;
}

// ---------------------------------------------------------------------------

WindowClassifier::WindowClassifier(ProposalConfig cfg) : cfg_(cfg) {
  Rng rng(mix64(cfg_.seed, fnv1a64("proposal-init")));
  ad::make_lstm(params_, "prop.l1", cfg_.input_dim, cfg_.hidden, rng);
  ad::make_lstm(params_, "prop.l2", cfg_.hidden, cfg_.hidden, rng);
  ad::Tensor& W = params_.create("prop.out.W", {1, cfg_.hidden});
  ad::init_uniform(W, rng);
  params_.create("prop.out.b", {1});
}

ad::Var WindowClassifier::forward(ad::Tape& t, const std::vector<std::vector<double>>& chunks) const {
  if (chunks.empty()) throw Error("window shorter than one chunk");
  auto& ps = const_cast<ad::ParamStore&>(params_);
  const ad::LstmParams l1 = ad::get_lstm(ps, "prop.l1", cfg_.hidden);
  const ad::LstmParams l2 = ad::get_lstm(ps, "prop.l2", cfg_.hidden);
  ad::LstmState s1 = ad::lstm_zero_state(t, cfg_.hidden);
  ad::LstmState s2 = ad::lstm_zero_state(t, cfg_.hidden);
  for (const auto& chunk : chunks) {
    if (static_cast<int>(chunk.size()) != cfg_.input_dim)
      throw Error("chunk descriptor dim mismatch");
    s1 = ad::lstm_step(t, l1, t.input(chunk), s1);
    s2 = ad::lstm_step(t, l2, s1.h, s2);
  }
  return t.affine(ps.at("prop.out.W"), &ps.at("prop.out.b"), s2.h);  // logit
}

double WindowClassifier::probability(const std::vector<std::vector<double>>& chunks) const {
  ad::Tape t;
  return t.value(t.sigmoid_(forward(t, chunks)));
}

std::vector<double> WindowClassifier::classify_windows(
    const std::vector<std::vector<std::vector<double>>>& windows) const {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(probability(w));
  return out;
}

WindowClassifier::TrainStats WindowClassifier::train(
    const std::vector<std::vector<std::vector<double>>>& windows,
    const std::vector<int>& labels) {
  if (windows.size() != labels.size()) throw Error("labels not parallel to windows");
  if (windows.empty()) throw Error("no training windows");
  Rng rng(mix64(cfg_.seed, fnv1a64("proposal-train")));
  ad::SgdMomentum sgd(cfg_.lr, cfg_.momentum);
  std::vector<int> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  TrainStats stats;
  ad::Tape t;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    for (int idx : order) {
      t.reset();
      ad::Var logit = forward(t, windows[static_cast<size_t>(idx)]);
      const double y = labels[static_cast<size_t>(idx)] ? 1.0 : 0.0;
      const std::array<double, 1> target{y};
      ad::Var loss = t.bce_with_logits(logit, target);
      if (y > 0.5) loss = t.scale(loss, cfg_.pos_weight);
      loss_sum += t.value(loss);
      t.backward(loss);
      sgd.step(params_);
      params_.zero_grad();
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(windows.size()));
  }
  return stats;
}

void WindowClassifier::save(const std::string& path) const {
  json j;
  j["format"] = "stvg-params/1";
  j["kind"] = "proposal";
  j["config"] = {{"chunk_len", cfg_.chunk_len}, {"input_dim", cfg_.input_dim},
                 {"hidden", cfg_.hidden},       {"lr", cfg_.lr},
                 {"momentum", cfg_.momentum},   {"epochs", cfg_.epochs},
                 {"pos_weight", cfg_.pos_weight}, {"seed", cfg_.seed}};
  json tensors = json::array();
  for (const auto& [name, t] : params_.tensors())
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"data", t.value}});
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

WindowClassifier WindowClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "stvg-params/1" || j.value("kind", "") != "proposal")
    throw ParseError(1, "not a proposal parameter file");
  const auto& jc = j.at("config");
  ProposalConfig cfg;
  cfg.chunk_len = jc.at("chunk_len").get<int>();
  cfg.input_dim = jc.at("input_dim").get<int>();
  cfg.hidden = jc.at("hidden").get<int>();
  cfg.lr = jc.at("lr").get<double>();
  cfg.momentum = jc.at("momentum").get<double>();
  cfg.epochs = jc.at("epochs").get<int>();
  cfg.pos_weight = jc.at("pos_weight").get<double>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  WindowClassifier w(cfg);
  w.params_ = ad::ParamStore();
  for (const auto& jt : j.at("tensors")) {
    ad::Tensor& t = w.params_.create(jt.at("name").get<std::string>(),
                                     jt.at("shape").get<std::vector<int>>());
    t.value = jt.at("data").get<std::vector<double>>();
  }
  return w;
}

std::vector<WindowProposal> propose_intervals(const VideoInfo& video,
                                              const std::vector<Tubelet>& objects,
                                              const FeatureProvider& provider,
                                              const WindowClassifier& classifier, int top_k,
                                              int base_length, int stride, int n_scales) {
  const auto windows = enumerate_windows(video.n_frames, base_length, stride, n_scales);
  std::vector<WindowProposal> props;
  for (const auto& w : windows) {
    std::vector<std::vector<double>> chunks;
    for (const auto& c : window_chunks(w, classifier.config().chunk_len))
      chunks.push_back(provider.chunk_descriptor(video, objects, c));
    props.push_back({w, classifier.probability(chunks)});
  }
  std::stable_sort(props.begin(), props.end(), [](const WindowProposal& a, const WindowProposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
    return a.interval.length() < b.interval.length();
  });
  if (static_cast<int>(props.size()) > top_k) props.resize(static_cast<size_t>(top_k));
  return props;
}

Tubelet perturb_tubelet(const Tubelet& t, int width, int height, double jitter_frac,
                        double drop_rate, Rng& rng) {
  Tubelet out = t;
  out.is_gt = false;
  for (auto& slot : out.boxes) {
    if (!slot.has_value()) continue;
    if (rng.uniform() < drop_rate) {
      slot.reset();
      continue;
    }
    BoundingBox b = *slot;
    const double sx = jitter_frac * b.width();
    const double sy = jitter_frac * b.height();
    double x0 = b.x_min + sx * rng.gaussian();
    double x1 = b.x_max + sx * rng.gaussian();
    double y0 = b.y_min + sy * rng.gaussian();
    double y1 = b.y_max + sy * rng.gaussian();
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    x0 = std::clamp(x0, 0.0, static_cast<double>(width) - 1.0);
    y0 = std::clamp(y0, 0.0, static_cast<double>(height) - 1.0);
    x1 = std::clamp(x1, x0 + 1.0, static_cast<double>(width));
    y1 = std::clamp(y1, y0 + 1.0, static_cast<double>(height));
    slot = BoundingBox{x0, y0, x1, y1};
  }
  // keep at least one box so features remain derivable
  if (!std::any_of(out.boxes.begin(), out.boxes.end(),
                   [](const auto& b) { return b.has_value(); })) {
    const size_t mid = out.boxes.size() / 2;
    const auto* orig = t.box_at(t.frame_start + static_cast<int>(mid));
    if (orig && orig->has_value()) out.boxes[mid] = **orig;
  }
  return out;
}

GroundingInstance perturb_instance(const GroundingInstance& inst, const VideoInfo& video,
                                   double jitter_frac, double drop_rate, Rng& rng) {
  GroundingInstance out = inst;
  for (auto& c : out.candidates)
    c = perturb_tubelet(c, video.width, video.height, jitter_frac, drop_rate, rng);
  return out;
}

std::map<std::string, FrameDetections> load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::map<std::string, FrameDetections> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "meta") continue;
    if (type != "frame_dets") throw ParseError(lineno, "unknown record type '" + type + "'");
    const std::string vid = j.at("video_id").get<std::string>();
    const int frame = j.at("frame").get<int>();
    auto& fd = out[vid];
    if (fd.frames.empty()) fd.first_frame = frame;
    const int idx = frame - fd.first_frame;
    if (idx < 0) throw ParseError(lineno, "frames out of order for video " + vid);
    if (idx >= static_cast<int>(fd.frames.size())) fd.frames.resize(static_cast<size_t>(idx) + 1);
    const auto& boxes = j.at("boxes");
    const auto& scores = j.at("scores");
    if (boxes.size() != scores.size()) throw ParseError(lineno, "boxes/scores mismatch");
    for (size_t k = 0; k < boxes.size(); ++k) {
      const auto& bb = boxes[k];
      if (!bb.is_array() || bb.size() != 4) throw ParseError(lineno, "box must be [x0,y0,x1,y1]");
      Detection d;
      d.box = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      d.confidence = scores[k].get<double>();
      if (d.confidence < 0 || d.confidence > 1)
        throw ValidationError("scores", "confidence outside [0,1]");
      fd.frames[static_cast<size_t>(idx)].push_back(d);
    }
  }
  for (auto& [_, fd] : out) fd.normalize();
  return out;
}

void save_detections(const std::map<std::string, FrameDetections>& dets,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << json{{"type", "meta"}, {"format", "stvg-dets/1"}}.dump() << "\n";
  for (const auto& [vid, fd] : dets) {
    for (size_t f = 0; f < fd.frames.size(); ++f) {
      json boxes = json::array();
      json scores = json::array();
      for (const auto& d : fd.frames[f]) {
        boxes.push_back({d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max});
        scores.push_back(d.confidence);
      }
      out << json{{"type", "frame_dets"},
                  {"video_id", vid},
                  {"frame", fd.first_frame + static_cast<int>(f)},
                  {"boxes", boxes},
                  {"scores", scores}}
                 .dump()
          << "\n";
    }
  }
}

}  // namespace stvg::proposals
