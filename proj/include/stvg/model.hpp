#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stvg/autodiff.hpp"
#include "stvg/features.hpp"
#include "stvg/language.hpp"
#include "stvg/metrics.hpp"
#include "stvg/types.hpp"
#include "stvg/vismod.hpp"

namespace stvg::model {

inline const std::vector<std::string> kAllModules = {
    "subj", "loc", "rel", "subj_motion", "rel_motion", "moving_loc"};

struct ModelConfig {
  std::string variant = "fused1";  // rgb | flow | flow5 | fused1 | fused5
  int embed_dim = 32;
  int hidden_dim = 32;
  int mloc_hidden = 16;     // moving-location LSTM
  int relseq_hidden = 8;    // relationship-motion delta-sequence LSTM (fused5)
  int relseq_out = 8;
  double margin = 0.1;      // hinge margin
  double lambda1 = 1.0;     // hard-expression term
  double lambda2 = 1.0;     // hard-object term
  double lambda_att = 0.5;  // attribute loss weight
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 30;
  int train_frame_stride = 2;  // frame subsampling during training only
  uint64_t seed = 7;
  int appearance_dim = 0;  // filled from the provider at init

  std::vector<std::string> active_modules() const;
  bool stacked_flow() const { return variant == "flow5" || variant == "fused5"; }
  bool rel_motion_loc_seq() const { return variant == "fused5"; }
  bool has_module(const std::string& m) const;
  void validate() const;  // throws ConfigError
};

// Per-candidate interpretability record; total == dot(weights, scores).
struct ScoreBreakdown {
  double total = 0.0;
  std::vector<vismod::ModuleScore> modules;  // active modules, canonical order
  std::vector<double> module_weights;        // parallel to modules
  std::map<std::string, std::vector<double>> attentions;  // module -> per token
};

// Eq.-style combined hinge loss on plain scores.
double hinge_loss(double s_pos, double s_neg_expr, double s_neg_obj, double margin,
                  double lambda1, double lambda2);

// Multi-label binary cross-entropy over the attribute vocabulary, averaged
// over labels. Gold attributes missing from the vocabulary are ignored (a
// warning is emitted once per word).
double attribute_loss(std::span<const double> logits,
                      const std::set<std::string>& gold,
                      const std::vector<std::string>& attr_vocab);

std::vector<double> attribute_targets(const std::set<std::string>& gold,
                                      const std::vector<std::string>& attr_vocab);

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> val_accuracy;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  int skipped_instances = 0;
};

// Sorted unique attribute words over the train split's candidates; the
// appearance one-hot dimension and the attribute-head label space.
std::vector<std::string> train_attribute_vocab(const Dataset& data);

// Deterministic ranking order: descending total, ties by lower index.
std::vector<int> ranking_order(const std::vector<double>& totals);

class GroundingModel {
 public:
  explicit GroundingModel(ModelConfig cfg);

  // Builds vocabularies from the train split and initializes parameters.
  void init(const Dataset& data, int appearance_dim);
  bool initialized() const { return initialized_; }

  ScoreBreakdown score(const VideoInfo& video, const GroundingInstance& inst, int candidate,
                       const FeatureProvider& provider,
                       const std::set<std::string>* disabled = nullptr) const;

  // All candidates share one encoding pass; returns order + breakdowns
  // parallel to candidates.
  std::vector<int> rank(const VideoInfo& video, const GroundingInstance& inst,
                        const FeatureProvider& provider,
                        std::vector<ScoreBreakdown>* breakdowns = nullptr,
                        const std::set<std::string>* disabled = nullptr) const;

  TrainLog train(const Dataset& data, const FeatureProvider& provider);

  metrics::EvalReport evaluate(const Dataset& data, const std::string& split,
                               const FeatureProvider& provider,
                               const std::set<std::string>* disabled = nullptr) const;

  // Predicted tubelets under (possibly perturbed) candidate sets, scored
  // against the clean ground truth.
  metrics::EvalReport evaluate_tubelets(const Dataset& data, const std::string& split,
                                        const FeatureProvider& provider,
                                        const std::vector<GroundingInstance>* scored_instances,
                                        double iou_threshold = 0.5) const;

  lang::LanguageEncoding encode_only(const Expression& expr) const;

  // Tape-level total for one candidate given an encoder output; the same
  // graph the trainer builds (exposed for gradient checking).
  ad::Var score_on_tape(ad::Tape& t, const lang::EncoderOutput& enc,
                        const CandidateFeatures& cf, int frame_stride = 1) const;

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }
  const lang::Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& attribute_vocab() const { return attr_vocab_; }

  void save(const std::string& path) const;
  static GroundingModel load(const std::string& path);

  // Test hook: install vocabularies directly and initialize parameters.
  void init_direct(lang::Vocab vocab, std::vector<std::string> attr_vocab, int appearance_dim);

 private:
  friend struct ModelTape;
  ModelConfig cfg_;
  ad::ParamStore params_;
  lang::Vocab vocab_;
  std::vector<std::string> attr_vocab_;
  bool initialized_ = false;
};

// Validates that every name is an active module; returns the 0/1 weight mask
// in canonical module order.
std::vector<double> ablation_mask(const ModelConfig& cfg,
                                  const std::set<std::string>& disabled);

}  // namespace stvg::model
