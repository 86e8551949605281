#pragma once

#include <string>
#include <vector>

#include "stvg/autodiff.hpp"
#include "stvg/features.hpp"
#include "stvg/types.hpp"

namespace stvg::proposals {

struct Detection {
  BoundingBox box;
  double confidence = 0.0;
};

// Per-frame detection lists; index 0 is video frame `first_frame`.
struct FrameDetections {
  int first_frame = 0;
  std::vector<std::vector<Detection>> frames;

  // sort each frame by descending confidence and keep the top 300
  void normalize();
};

// Greedy best-path linking: repeatedly extract the frame-consecutive path
// maximizing the confidence sum subject to IoU(prev, next) >= link_iou,
// remove its boxes, and emit it as a tubelet. Ties: earliest start frame,
// then lexicographically smallest box-index sequence.
std::vector<Tubelet> link_tubelets(const FrameDetections& dets, double link_iou = 0.5,
                                   int max_tubelets = 8,
                                   const std::string& class_label = "object");

// Multi-scale sliding windows: lengths base*2^k for k < n_scales (skipping
// lengths above n_frames), stride `stride`, ascending by (start, length).
std::vector<TemporalInterval> enumerate_windows(int n_frames, int base_length = 16,
                                                int stride = 8, int n_scales = 3);

struct WindowProposal {
  TemporalInterval interval;
  double score = 0.0;  // event probability
};

struct ProposalConfig {
  int chunk_len = 16;
  int input_dim = FeatureProvider::kChunkDim;
  int hidden = 16;
  double lr = 0.1;
  double momentum = 0.9;
  int epochs = 30;
  double pos_weight = 3.0;  // positive-class weight against imbalance
  uint64_t seed = 7;
};

// 2-layer recurrent {event, background} window classifier over per-chunk
// descriptors.
class WindowClassifier {
 public:
  explicit WindowClassifier(ProposalConfig cfg);

  // probability of "event" for one window's chunk-descriptor sequence;
  // throws when the sequence is empty (window shorter than one chunk)
  double probability(const std::vector<std::vector<double>>& chunks) const;

  std::vector<double> classify_windows(
      const std::vector<std::vector<std::vector<double>>>& windows) const;

  struct TrainStats {
    std::vector<double> epoch_loss;
  };
  TrainStats train(const std::vector<std::vector<std::vector<double>>>& windows,
                   const std::vector<int>& labels);

  void save(const std::string& path) const;
  static WindowClassifier load(const std::string& path);

  const ProposalConfig& config() const { return cfg_; }

 private:
  ad::Var forward(ad::Tape& t, const std::vector<std::vector<double>>& chunks) const;
  ProposalConfig cfg_;
  ad::ParamStore params_;
};

// Consecutive full chunks of a window; the final partial chunk is dropped.
std::vector<TemporalInterval> window_chunks(const TemporalInterval& w, int chunk_len);

// enumerate -> describe chunks -> classify -> top_k by probability
// (ties: earlier start, then shorter).
std::vector<WindowProposal> propose_intervals(const VideoInfo& video,
                                              const std::vector<Tubelet>& objects,
                                              const FeatureProvider& provider,
                                              const WindowClassifier& classifier, int top_k,
                                              int base_length = 16, int stride = 8,
                                              int n_scales = 3);

// Detector-style degradation of ground-truth candidates: per-frame jitter of
// sigma_frac * box size on each coordinate pair plus random frame drops.
Tubelet perturb_tubelet(const Tubelet& t, int width, int height, double jitter_frac,
                        double drop_rate, Rng& rng);

GroundingInstance perturb_instance(const GroundingInstance& inst, const VideoInfo& video,
                                   double jitter_frac, double drop_rate, Rng& rng);

// dets file: stvg/1-style lines {"type":"frame_dets","video_id","frame","boxes","scores"}
std::map<std::string, FrameDetections> load_detections(const std::string& path);
void save_detections(const std::map<std::string, FrameDetections>& dets,
                     const std::string& path);

}  // namespace stvg::proposals
