#pragma once

#include <array>
#include <string>
#include <vector>

#include "stvg/types.hpp"

namespace stvg {

// Per-frame descriptors for one candidate, with context features for up to
// five same-class context objects (fixed order across frames).
struct FrameFeatures {
  std::vector<double> appearance;                 // dim D_a
  std::vector<double> motion;                     // (dx/W, dy/H, |d|)
  std::array<double, 5> location{};               // l_i
  std::vector<std::array<double, 5>> deltas;      // target - context, <= 5
  std::vector<std::vector<double>> ctx_appearance;  // parallel to deltas
  std::vector<std::vector<double>> ctx_motion;      // parallel to deltas
};

struct CandidateFeatures {
  int first_frame = 0;  // video frame index of frames[0]
  int core_begin = 0;   // offset of interval.start inside frames
  int core_count = 0;   // number of interval frames
  std::vector<FrameFeatures> frames;  // interval padded by 2 frames each side
};

// Visual-feature abstraction standing in for the pretrained extractors; all
// descriptors are derived from candidate boxes and attribute words.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;

  // One entry per candidate; contexts are the other candidates.
  virtual std::vector<CandidateFeatures> features(const VideoInfo& video,
                                                  const GroundingInstance& inst) const = 0;

  // Motion-statistics descriptor of one 16-frame chunk, for the temporal
  // proposal classifier.
  virtual std::vector<double> chunk_descriptor(const VideoInfo& video,
                                               const std::vector<Tubelet>& objects,
                                               const TemporalInterval& chunk) const = 0;

  virtual int appearance_dim() const = 0;
  static constexpr int kMotionDim = 3;
  static constexpr int kChunkDim = 6;
};

class BoxFeatureProvider : public FeatureProvider {
 public:
  BoxFeatureProvider(std::vector<std::string> attribute_vocab, uint64_t noise_seed,
                     double noise_sigma);

  std::vector<CandidateFeatures> features(const VideoInfo& video,
                                          const GroundingInstance& inst) const override;
  std::vector<double> chunk_descriptor(const VideoInfo& video,
                                       const std::vector<Tubelet>& objects,
                                       const TemporalInterval& chunk) const override;
  int appearance_dim() const override { return static_cast<int>(attribute_vocab_.size()); }

  const std::vector<std::string>& attribute_vocab() const { return attribute_vocab_; }

 private:
  std::vector<std::string> attribute_vocab_;
  uint64_t noise_seed_;
  double noise_sigma_;
};

// Boxes with gaps filled by nearest-in-time imputation (forward then
// backward fill); frames is the number of video frames.
std::vector<BoundingBox> imputed_boxes(const Tubelet& t, int n_frames);

}  // namespace stvg
