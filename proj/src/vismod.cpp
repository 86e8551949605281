#include "stvg/vismod.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "stvg/errors.hpp"

namespace stvg::vismod {

namespace {

constexpr double kCoordTol = 1e-6;

int clamp_idx(int i, int n) { return std::clamp(i, 0, n - 1); }

void check_core(const CandidateFeatures& cf) {
  if (cf.core_count <= 0) throw Error("candidate features cover no interval frames");
  if (cf.core_begin < 0 ||
      cf.core_begin + cf.core_count > static_cast<int>(cf.frames.size()))
    throw Error("candidate feature core range out of bounds");
}

FrameScores pool(ad::Tape& t, std::vector<ad::Var> per_frame) {
  FrameScores fs;
  fs.pooled = t.mean_list(per_frame);
  fs.per_frame = std::move(per_frame);
  return fs;
}

ModuleScore extract(const ad::Tape& t, const FrameScores& fs, const std::string& name) {
  ModuleScore ms;
  ms.module = name;
  ms.score = t.value(fs.pooled);
  for (const auto& v : fs.per_frame) ms.per_frame.push_back(t.value(v));
  return ms;
}

}  // namespace

ad::Var projected_cosine(ad::Tape& t, const Projection& p, ad::Var x, ad::Var q) {
  return t.cosine(t.affine(*p.W, p.b, x), q);
}

ad::Var stacked_motion(ad::Tape& t, const CandidateFeatures& cf, int idx) {
  const int n = static_cast<int>(cf.frames.size());
  std::array<ad::Var, 5> parts;
  for (int d = -2; d <= 2; ++d)
    parts[static_cast<size_t>(d + 2)] =
        t.input(cf.frames[static_cast<size_t>(clamp_idx(idx + d, n))].motion);
  return t.concat(parts);
}

std::vector<double> location_input(const FrameFeatures& ff) {
  for (double c : ff.location)
    if (c < -kCoordTol || c > 1.0 + kCoordTol)
      throw ValidationError("location", "location coordinates not normalized to [0,1]");
  std::vector<double> in(30, 0.0);
  std::copy(ff.location.begin(), ff.location.end(), in.begin());
  const size_t n_ctx = std::min<size_t>(ff.deltas.size(), 5);
  for (size_t k = 0; k < n_ctx; ++k)
    std::copy(ff.deltas[k].begin(), ff.deltas[k].end(), in.begin() + 5 + 5 * static_cast<long>(k));
  return in;
}

SubjectResult subject_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                              ad::Var q, bool motion_input, bool stacked, int frame_stride) {
  check_core(cf);
  std::vector<ad::Var> scores;
  std::vector<ad::Var> embeds;
  for (int k = 0; k < cf.core_count; k += frame_stride) {
    const int idx = cf.core_begin + k;
    ad::Var x;
    if (!motion_input) {
      x = t.input(cf.frames[static_cast<size_t>(idx)].appearance);
    } else if (stacked) {
      x = stacked_motion(t, cf, idx);
    } else {
      x = t.input(cf.frames[static_cast<size_t>(idx)].motion);
    }
    ad::Var proj = t.affine(*p.W, p.b, x);
    embeds.push_back(proj);
    scores.push_back(t.dot(t.l2norm(proj), t.l2norm(q)));
  }
  SubjectResult r{pool(t, std::move(scores)), t.mean_list(embeds)};
  return r;
}

FrameScores location_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                             ad::Var q, int frame_stride) {
  check_core(cf);
  std::vector<ad::Var> scores;
  for (int k = 0; k < cf.core_count; k += frame_stride) {
    const int idx = cf.core_begin + k;
    ad::Var x = t.input(location_input(cf.frames[static_cast<size_t>(idx)]));
    scores.push_back(projected_cosine(t, p, x, q));
  }
  return pool(t, std::move(scores));
}

FrameScores relationship_score_t(ad::Tape& t, const Projection& p, const CandidateFeatures& cf,
                                 ad::Var q, bool motion_input, bool stacked,
                                 const DeltaSeqEncoder* seq, int frame_stride) {
  check_core(cf);
  const int n = static_cast<int>(cf.frames.size());
  std::vector<ad::Var> scores;
  for (int k = 0; k < cf.core_count; k += frame_stride) {
    const int idx = cf.core_begin + k;
    const FrameFeatures& ff = cf.frames[static_cast<size_t>(idx)];
    const size_t n_ctx = ff.deltas.size();
    if (n_ctx == 0) {
      scores.push_back(t.scalar(-1.0));  // sentinel: can never win a cosine
      continue;
    }
    std::vector<ad::Var> per_ctx;
    for (size_t c = 0; c < n_ctx; ++c) {
      ad::Var desc;
      if (!motion_input) {
        desc = t.input(ff.ctx_appearance[c]);
      } else if (stacked) {
        std::array<ad::Var, 5> parts;
        for (int d = -2; d <= 2; ++d) {
          const auto& fr = cf.frames[static_cast<size_t>(clamp_idx(idx + d, n))];
          parts[static_cast<size_t>(d + 2)] =
              t.input(c < fr.ctx_motion.size() ? fr.ctx_motion[c] : std::vector<double>(3, 0.0));
        }
        desc = t.concat(parts);
      } else {
        desc = t.input(ff.ctx_motion[c]);
      }
      ad::Var loc_part;
      if (seq) {
        // encode the delta sequence over the 5-frame window
        std::vector<ad::Var> hs;
        ad::LstmState st = ad::lstm_zero_state(t, seq->lstm.hidden);
        for (int d = -2; d <= 2; ++d) {
          const auto& fr = cf.frames[static_cast<size_t>(clamp_idx(idx + d, n))];
          std::vector<double> dv(5, 0.0);
          if (c < fr.deltas.size()) dv.assign(fr.deltas[c].begin(), fr.deltas[c].end());
          st = ad::lstm_step(t, seq->lstm, t.input(dv), st);
          hs.push_back(st.h);
        }
        loc_part = t.affine(*seq->out.W, seq->out.b, t.concat(hs));
      } else {
        loc_part = t.input(std::vector<double>(ff.deltas[c].begin(), ff.deltas[c].end()));
      }
      std::array<ad::Var, 2> parts{desc, loc_part};
      per_ctx.push_back(projected_cosine(t, p, t.concat(parts), q));
    }
    scores.push_back(t.max_list(per_ctx));
  }
  return pool(t, std::move(scores));
}

ad::Var moving_location_step(ad::Tape& t, const ad::LstmParams& lstm, const Projection& out,
                             const std::vector<std::vector<double>>& steps, ad::Var q) {
  if (steps.size() != 5) throw Error("moving location expects exactly 5 time steps");
  std::vector<ad::Var> hs;
  ad::LstmState st = ad::lstm_zero_state(t, lstm.hidden);
  for (const auto& step : steps) {
    st = ad::lstm_step(t, lstm, t.input(step), st);
    hs.push_back(st.h);
  }
  return t.cosine(t.affine(*out.W, out.b, t.concat(hs)), q);
}

FrameScores moving_location_score_t(ad::Tape& t, const ad::LstmParams& lstm,
                                    const Projection& out, const CandidateFeatures& cf,
                                    ad::Var q, int frame_stride) {
  check_core(cf);
  const int n = static_cast<int>(cf.frames.size());
  std::vector<ad::Var> scores;
  for (int k = 0; k < cf.core_count; k += frame_stride) {
    const int idx = cf.core_begin + k;
    std::vector<std::vector<double>> steps;
    for (int d = -2; d <= 2; ++d)
      steps.push_back(location_input(cf.frames[static_cast<size_t>(clamp_idx(idx + d, n))]));
    scores.push_back(moving_location_step(t, lstm, out, steps, q));
  }
  return pool(t, std::move(scores));
}

// ---------------------------------------------------------------------------

ModuleScore subject_score(const std::vector<std::vector<double>>& frames,
                          std::span<const double> query, const Projection& p) {
  if (frames.empty()) throw Error("subject_score: no frames");
  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = static_cast<int>(frames.size());
  for (const auto& f : frames) {
    FrameFeatures ff;
    ff.appearance = f;
    cf.frames.push_back(std::move(ff));
  }
  ad::Tape t;
  ad::Var q = t.input(query);
  const SubjectResult r = subject_score_t(t, p, cf, q, false, false);
  return extract(t, r.scores, "subj");
}

ModuleScore location_score(const std::vector<FrameFeatures>& frames,
                           std::span<const double> query, const Projection& p) {
  if (frames.empty()) throw Error("location_score: no frames");
  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = static_cast<int>(frames.size());
  cf.frames = frames;
  ad::Tape t;
  ad::Var q = t.input(query);
  const FrameScores fs = location_score_t(t, p, cf, q);
  return extract(t, fs, "loc");
}

ModuleScore relationship_score(const std::vector<FrameFeatures>& frames,
                               std::span<const double> query, const Projection& p,
                               bool motion_input) {
  if (frames.empty()) throw Error("relationship_score: no frames");
  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = static_cast<int>(frames.size());
  cf.frames = frames;
  ad::Tape t;
  ad::Var q = t.input(query);
  const FrameScores fs = relationship_score_t(t, p, cf, q, motion_input, false, nullptr);
  return extract(t, fs, motion_input ? "rel_motion" : "rel");
}

ModuleScore moving_location_score(const std::vector<FrameFeatures>& frames,
                                  std::span<const double> query, const ad::LstmParams& lstm,
                                  const Projection& out, ad::ParamStore&) {
  if (frames.empty()) throw Error("moving_location_score: no frames");
  CandidateFeatures cf;
  cf.core_begin = 0;
  cf.core_count = static_cast<int>(frames.size());
  cf.frames = frames;
  ad::Tape t;
  ad::Var q = t.input(query);
  const FrameScores fs = moving_location_score_t(t, lstm, out, cf, q);
  return extract(t, fs, "moving_loc");
}

}  // namespace stvg::vismod
