#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stvg/autodiff.hpp"
#include "stvg/features.hpp"

namespace stvg::vismod {

// Score of one module for one candidate: cosine similarities in the joint
// embedding, average-pooled over the interval frames.
struct ModuleScore {
  std::string module;
  double score = 0.0;
  std::vector<double> per_frame;
};

struct Projection {
  ad::Tensor* W = nullptr;
  ad::Tensor* b = nullptr;
};

struct FrameScores {
  ad::Var pooled;                  // dim 1, arithmetic mean of per_frame
  std::vector<ad::Var> per_frame;  // dim 1 each
};

// cosine(W x + b, q)
ad::Var projected_cosine(ad::Tape& t, const Projection& p, ad::Var x, ad::Var q);

// 15-dim stacked motion descriptor at padded index `idx`: frames idx-2..idx+2
// clamped to the array bounds (which coincide with the video bounds).
ad::Var stacked_motion(ad::Tape& t, const CandidateFeatures& cf, int idx);

// 30-dim location input: l_i concatenated with the five context deltas,
// zero-padded. Throws when location coordinates are not normalized.
std::vector<double> location_input(const FrameFeatures& ff);

struct SubjectResult {
  FrameScores scores;
  ad::Var pooled_embed;  // mean projected appearance (joint space), dim E
};

// frame_stride applies to the pooled loops (training-time subsampling);
// stride 1 everywhere else.
SubjectResult subject_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                              ad::Var q, bool motion_input, bool stacked, int frame_stride = 1);

FrameScores location_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                             ad::Var q, int frame_stride = 1);

// Per context: cosine(proj([ctx descriptor; delta]), q); per-frame max over
// contexts; -1 sentinel when there are no contexts. In the stacked setting
// the optional sequence encoder replaces the raw delta with an LSTM encoding
// of the delta sequence over the 5-frame window.
struct DeltaSeqEncoder {
  ad::LstmParams lstm;
  Projection out;  // 5*hidden -> encoding dim
  int out_dim = 0;
};

FrameScores relationship_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                                 ad::Var q, bool motion_input, bool stacked,
                                 const DeltaSeqEncoder* seq, int frame_stride = 1);

// LSTM over the 5-step [l; deltas] sequence; all hidden states concatenated
// then projected to the joint space.
FrameScores moving_location_score_t(ad::Tape& t, const ad::LstmParams& lstm,
                                    const Projection& out, const CandidateFeatures& cf,
                                    ad::Var q, int frame_stride = 1);

// One moving-location step in isolation; `steps` must have exactly 5 entries.
ad::Var moving_location_step(ad::Tape& t, const ad::LstmParams& lstm, const Projection& out,
                             const std::vector<std::vector<double>>& steps, ad::Var q);

// ---------------------------------------------------------------------------
// Plain-input wrappers used by tests and small tools; each runs a local tape.

ModuleScore subject_score(const std::vector<std::vector<double>>& frames,
                          std::span<const double> query, const Projection& p);

ModuleScore location_score(const std::vector<FrameFeatures>& frames,
                           std::span<const double> query, const Projection& p);

ModuleScore relationship_score(const std::vector<FrameFeatures>& frames,
                               std::span<const double> query, const Projection& p,
                               bool motion_input);

ModuleScore moving_location_score(const std::vector<FrameFeatures>& frames,
                                  std::span<const double> query, const ad::LstmParams& lstm,
                                  const Projection& out, ad::ParamStore& ps);

}  // namespace stvg::vismod
