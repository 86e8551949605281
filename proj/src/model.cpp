#include "stvg/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "stvg/errors.hpp"

namespace stvg::model {

using nlohmann::json;

std::vector<std::string> ModelConfig::active_modules() const {
  std::set<std::string> active;
  if (variant == "rgb") {
    active = {"subj", "loc", "rel"};
  } else if (variant == "flow" || variant == "flow5") {
    active = {"subj_motion", "loc", "rel_motion"};
  } else if (variant == "fused1") {
    active = {"subj", "loc", "rel", "subj_motion", "rel_motion"};
  } else if (variant == "fused5") {
    active = {"subj", "loc", "rel", "subj_motion", "rel_motion", "moving_loc"};
  } else {
    throw ConfigError("unknown variant: " + variant);
  }
  std::vector<std::string> out;
  for (const auto& m : kAllModules)
    if (active.count(m)) out.push_back(m);
  return out;
}

bool ModelConfig::has_module(const std::string& m) const {
  const auto mods = active_modules();
  return std::find(mods.begin(), mods.end(), m) != mods.end();
}

void ModelConfig::validate() const {
  active_modules();  // throws on unknown variant
  if (margin < 0) throw ConfigError("margin must be non-negative");
  if (lambda1 < 0 || lambda2 < 0 || lambda_att < 0)
    throw ConfigError("loss weights must be non-negative");
  if (embed_dim <= 0 || hidden_dim <= 0) throw ConfigError("dims must be positive");
  if (epochs < 0 || lr <= 0) throw ConfigError("bad optimizer settings");
  if (train_frame_stride < 1) throw ConfigError("train_frame_stride must be >= 1");
}

double hinge_loss(double s_pos, double s_neg_expr, double s_neg_obj, double margin,
                  double lambda1, double lambda2) {
  if (margin < 0 || lambda1 < 0 || lambda2 < 0)
    throw ConfigError("hinge_loss: margin and weights must be non-negative");
  return lambda1 * std::max(0.0, margin + s_neg_expr - s_pos) +
         lambda2 * std::max(0.0, margin + s_neg_obj - s_pos);
}

std::vector<double> attribute_targets(const std::set<std::string>& gold,
                                      const std::vector<std::string>& attr_vocab) {
  static std::set<std::string> warned;
  std::vector<double> t(attr_vocab.size(), 0.0);
  for (const auto& g : gold) {
    auto it = std::find(attr_vocab.begin(), attr_vocab.end(), g);
    if (it == attr_vocab.end()) {
      if (warned.insert(g).second)
        std::cerr << "warning: attribute '" << g << "' not in vocabulary, ignored\n";
      continue;
    }
    t[static_cast<size_t>(it - attr_vocab.begin())] = 1.0;
  }
  return t;
}

double attribute_loss(std::span<const double> logits, const std::set<std::string>& gold,
                      const std::vector<std::string>& attr_vocab) {
  if (logits.size() != attr_vocab.size())
    throw Error("attribute_loss: logits not parallel to vocabulary");
  const auto targets = attribute_targets(gold, attr_vocab);
  double acc = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double z = logits[i];
    acc += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return acc / static_cast<double>(targets.size());
}

std::vector<int> ranking_order(const std::vector<double>& totals) {
  std::vector<int> order(totals.size());
  for (size_t i = 0; i < totals.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return totals[static_cast<size_t>(a)] > totals[static_cast<size_t>(b)];
  });
  return order;
}

std::vector<double> ablation_mask(const ModelConfig& cfg,
                                  const std::set<std::string>& disabled) {
  const auto mods = cfg.active_modules();
  for (const auto& d : disabled)
    if (std::find(mods.begin(), mods.end(), d) == mods.end())
      throw ConfigError("cannot disable inactive module: " + d);
  std::vector<double> mask;
  for (const auto& m : mods) mask.push_back(disabled.count(m) ? 0.0 : 1.0);
  return mask;
}

// ---------------------------------------------------------------------------

struct ModelTape {
  struct Score {
    ad::Var total;
    std::vector<ad::Var> module_scores;
    std::vector<std::vector<ad::Var>> per_frame;
    std::optional<ad::Var> subj_embed;
  };

  static Score score_candidate(ad::Tape& t, const GroundingModel& m,
                               const lang::EncoderOutput& enc, const CandidateFeatures& cf,
                               int frame_stride) {
    const ModelConfig& cfg = m.cfg_;
    ad::ParamStore& ps = const_cast<ad::ParamStore&>(m.params_);
    const auto mods = cfg.active_modules();
    Score s;
    for (size_t mi = 0; mi < mods.size(); ++mi) {
      const std::string& name = mods[mi];
      const ad::Var q = enc.query[mi];
      vismod::FrameScores fs;
      if (name == "subj") {
        vismod::Projection p{&ps.at("vis.subj.W"), &ps.at("vis.subj.b")};
        auto r = vismod::subject_score_t(t, p, cf, q, false, false, frame_stride);
        fs = std::move(r.scores);
        s.subj_embed = r.pooled_embed;
      } else if (name == "loc") {
        vismod::Projection p{&ps.at("vis.loc.W"), &ps.at("vis.loc.b")};
        fs = vismod::location_score_t(t, p, cf, q, frame_stride);
      } else if (name == "rel") {
        vismod::Projection p{&ps.at("vis.rel.W"), &ps.at("vis.rel.b")};
        fs = vismod::relationship_score_t(t, p, cf, q, false, false, nullptr, frame_stride);
      } else if (name == "subj_motion") {
        vismod::Projection p{&ps.at("vis.subj_motion.W"), &ps.at("vis.subj_motion.b")};
        auto r = vismod::subject_score_t(t, p, cf, q, true, cfg.stacked_flow(), frame_stride);
        fs = std::move(r.scores);
      } else if (name == "rel_motion") {
        vismod::Projection p{&ps.at("vis.rel_motion.W"), &ps.at("vis.rel_motion.b")};
        if (cfg.rel_motion_loc_seq()) {
          vismod::DeltaSeqEncoder seq;
          seq.lstm = ad::get_lstm(ps, "vis.relseq", cfg.relseq_hidden);
          seq.out = {&ps.at("vis.relseq.out.W"), &ps.at("vis.relseq.out.b")};
          seq.out_dim = cfg.relseq_out;
          fs = vismod::relationship_score_t(t, p, cf, q, true, cfg.stacked_flow(), &seq,
                                            frame_stride);
        } else {
          fs = vismod::relationship_score_t(t, p, cf, q, true, cfg.stacked_flow(), nullptr,
                                            frame_stride);
        }
      } else if (name == "moving_loc") {
        const ad::LstmParams lstm = ad::get_lstm(ps, "vis.mloc", cfg.mloc_hidden);
        vismod::Projection out{&ps.at("vis.mloc.out.W"), &ps.at("vis.mloc.out.b")};
        fs = vismod::moving_location_score_t(t, lstm, out, cf, q, frame_stride);
      } else {
        throw Error("unknown module " + name);
      }
      s.module_scores.push_back(fs.pooled);
      s.per_frame.push_back(std::move(fs.per_frame));
    }
    s.total = t.dot(enc.weights, t.concat(s.module_scores));
    return s;
  }
};

// ---------------------------------------------------------------------------

GroundingModel::GroundingModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<std::string> train_attribute_vocab(const Dataset& data) {
  std::set<std::string> attrs;
  for (const auto* inst : data.split_instances("train"))
    for (const auto& c : inst->candidates)
      for (const auto& a : c.attributes) attrs.insert(a);
  return {attrs.begin(), attrs.end()};
}

void GroundingModel::init(const Dataset& data, int appearance_dim) {
  init_direct(lang::Vocab::build(data.split_instances("train")), train_attribute_vocab(data),
              appearance_dim);
}

void GroundingModel::init_direct(lang::Vocab vocab, std::vector<std::string> attr_vocab,
                                 int appearance_dim) {
  vocab_ = std::move(vocab);
  attr_vocab_ = std::move(attr_vocab);
  cfg_.appearance_dim = appearance_dim;
  params_ = ad::ParamStore();
  Rng rng(mix64(cfg_.seed, fnv1a64("init")));

  lang::EncoderConfig ec{cfg_.embed_dim, cfg_.hidden_dim, cfg_.active_modules()};
  lang::create_encoder_params(params_, ec, vocab_.size(), rng);

  const int E = cfg_.embed_dim;
  const int Da = cfg_.appearance_dim;
  const int Dm = cfg_.stacked_flow() ? 5 * FeatureProvider::kMotionDim
                                     : FeatureProvider::kMotionDim;
  auto proj = [&](const std::string& name, int in_dim) {
    ad::Tensor& W = params_.create("vis." + name + ".W", {E, in_dim});
    ad::init_uniform(W, rng);
    params_.create("vis." + name + ".b", {E});
  };
  if (cfg_.has_module("subj")) proj("subj", Da);
  if (cfg_.has_module("loc")) proj("loc", 30);
  if (cfg_.has_module("rel")) proj("rel", Da + 5);
  if (cfg_.has_module("subj_motion")) proj("subj_motion", Dm);
  if (cfg_.has_module("rel_motion")) {
    const int loc_dim = cfg_.rel_motion_loc_seq() ? cfg_.relseq_out : 5;
    proj("rel_motion", Dm + loc_dim);
    if (cfg_.rel_motion_loc_seq()) {
      ad::make_lstm(params_, "vis.relseq", 5, cfg_.relseq_hidden, rng);
      ad::Tensor& W = params_.create("vis.relseq.out.W", {cfg_.relseq_out, 5 * cfg_.relseq_hidden});
      ad::init_uniform(W, rng);
      params_.create("vis.relseq.out.b", {cfg_.relseq_out});
    }
  }
  if (cfg_.has_module("moving_loc")) {
    ad::make_lstm(params_, "vis.mloc", 30, cfg_.mloc_hidden, rng);
    ad::Tensor& W = params_.create("vis.mloc.out.W", {E, 5 * cfg_.mloc_hidden});
    ad::init_uniform(W, rng);
    params_.create("vis.mloc.out.b", {E});
  }
  if (cfg_.has_module("subj")) {
    ad::Tensor& W = params_.create("vis.attr.W",
                                   {std::max(1, static_cast<int>(attr_vocab_.size())), E});
    ad::init_uniform(W, rng);
    params_.create("vis.attr.b", {std::max(1, static_cast<int>(attr_vocab_.size()))});
  }
  initialized_ = true;
}

ScoreBreakdown GroundingModel::score(const VideoInfo& video, const GroundingInstance& inst,
                                     int candidate, const FeatureProvider& provider,
                                     const std::set<std::string>* disabled) const {
  std::vector<ScoreBreakdown> breakdowns;
  rank(video, inst, provider, &breakdowns, disabled);
  return breakdowns.at(static_cast<size_t>(candidate));
}

std::vector<int> GroundingModel::rank(const VideoInfo& video, const GroundingInstance& inst,
                                      const FeatureProvider& provider,
                                      std::vector<ScoreBreakdown>* breakdowns,
                                      const std::set<std::string>* disabled) const {
  if (!initialized_) throw Error("model not initialized");
  if (inst.candidates.size() < 2) throw Error("rank needs at least 2 candidates");

  std::vector<double> mask;
  if (disabled && !disabled->empty()) mask = ablation_mask(cfg_, *disabled);

  ad::Tape t;
  lang::EncoderConfig ec{cfg_.embed_dim, cfg_.hidden_dim, cfg_.active_modules()};
  auto& ps = const_cast<ad::ParamStore&>(params_);
  const lang::EncoderOutput enc =
      lang::encode_expression(t, ps, ec, vocab_, inst.expression, mask);

  const auto features = provider.features(video, inst);
  std::vector<double> totals;
  for (size_t c = 0; c < inst.candidates.size(); ++c) {
    const auto ts = ModelTape::score_candidate(t, *this, enc, features[c], 1);
    totals.push_back(t.value(ts.total));
    if (breakdowns) {
      ScoreBreakdown b;
      b.total = t.value(ts.total);
      const auto mods = cfg_.active_modules();
      for (size_t mi = 0; mi < mods.size(); ++mi) {
        vismod::ModuleScore ms;
        ms.module = mods[mi];
        ms.score = t.value(ts.module_scores[mi]);
        for (const auto& v : ts.per_frame[mi]) ms.per_frame.push_back(t.value(v));
        b.modules.push_back(std::move(ms));
        auto a = t.values(enc.attention[mi]);
        b.attentions[mods[mi]] = {a.begin(), a.end()};
      }
      auto w = t.values(enc.weights);
      b.module_weights = {w.begin(), w.end()};
      breakdowns->push_back(std::move(b));
    }
  }
  return ranking_order(totals);
}

TrainLog GroundingModel::train(const Dataset& data, const FeatureProvider& provider) {
  if (!initialized_) init(data, provider.appearance_dim());

  const auto train_insts = data.split_instances("train");
  const auto val_insts = data.split_instances("val");
  if (train_insts.empty()) throw Error("train split is empty");

  // negative-expression pool: same video + interval, different target
  std::vector<std::vector<const Expression*>> neg_exprs(train_insts.size());
  for (size_t i = 0; i < train_insts.size(); ++i) {
    for (size_t j = 0; j < train_insts.size(); ++j) {
      if (i == j) continue;
      if (train_insts[i]->video_id == train_insts[j]->video_id &&
          train_insts[i]->interval == train_insts[j]->interval &&
          train_insts[i]->target_index != train_insts[j]->target_index)
        neg_exprs[i].push_back(&train_insts[j]->expression);
    }
  }

  TrainLog log;
  for (size_t i = 0; i < train_insts.size(); ++i) {
    if (neg_exprs[i].empty()) {
      std::cerr << "warning: instance " << train_insts[i]->id
                << " has no same-interval distractor expression; skipped\n";
      ++log.skipped_instances;
    }
  }

  // feature caches (features are deterministic per instance)
  std::vector<std::vector<CandidateFeatures>> train_feats(train_insts.size());
  for (size_t i = 0; i < train_insts.size(); ++i)
    train_feats[i] = provider.features(*data.video(train_insts[i]->video_id), *train_insts[i]);

  Rng rng(mix64(cfg_.seed, fnv1a64("train")));
  ad::SgdMomentum sgd(cfg_.lr, cfg_.momentum);
  ad::ParamStore best = params_;
  log.best_val_accuracy = -1.0;

  lang::EncoderConfig ec{cfg_.embed_dim, cfg_.hidden_dim, cfg_.active_modules()};
  const bool with_attr = cfg_.has_module("subj") && cfg_.lambda_att > 0 && !attr_vocab_.empty();

  std::vector<int> order(train_insts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  ad::Tape t;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    int n_steps = 0;
    for (int idx : order) {
      const GroundingInstance& inst = *train_insts[static_cast<size_t>(idx)];
      if (neg_exprs[static_cast<size_t>(idx)].empty()) continue;

      const auto& pool = neg_exprs[static_cast<size_t>(idx)];
      const Expression& r_j = *pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
      int o_k = rng.uniform_int(static_cast<int>(inst.candidates.size()) - 1);
      if (o_k >= inst.target_index) ++o_k;

      t.reset();
      const auto enc_pos = lang::encode_expression(t, params_, ec, vocab_, inst.expression);
      const auto enc_neg = lang::encode_expression(t, params_, ec, vocab_, r_j);
      const auto& feats = train_feats[static_cast<size_t>(idx)];
      const auto s_pos = ModelTape::score_candidate(t, *this, enc_pos,
                                                    feats[static_cast<size_t>(inst.target_index)],
                                                    cfg_.train_frame_stride);
      const auto s_ne = ModelTape::score_candidate(t, *this, enc_neg,
                                                   feats[static_cast<size_t>(inst.target_index)],
                                                   cfg_.train_frame_stride);
      const auto s_no = ModelTape::score_candidate(t, *this, enc_pos,
                                                   feats[static_cast<size_t>(o_k)],
                                                   cfg_.train_frame_stride);

      ad::Var h1 = t.relu_(t.add_const(t.sub(s_ne.total, s_pos.total), cfg_.margin));
      ad::Var h2 = t.relu_(t.add_const(t.sub(s_no.total, s_pos.total), cfg_.margin));
      ad::Var loss = t.add(t.scale(h1, cfg_.lambda1), t.scale(h2, cfg_.lambda2));
      if (with_attr && s_pos.subj_embed.has_value()) {
        ad::Var logits = t.affine(params_.at("vis.attr.W"), &params_.at("vis.attr.b"),
                                  *s_pos.subj_embed);
        const auto targets = attribute_targets(inst.attributes, attr_vocab_);
        loss = t.add(loss, t.scale(t.bce_with_logits(logits, targets), cfg_.lambda_att));
      }
      loss_sum += t.value(loss);
      ++n_steps;
      t.backward(loss);
      sgd.step(params_);
      params_.zero_grad();
    }
    log.epoch_loss.push_back(n_steps ? loss_sum / n_steps : 0.0);

    double val_acc = 0.0;
    if (!val_insts.empty()) {
      int correct = 0;
      for (const auto* inst : val_insts) {
        const auto order_v = rank(*data.video(inst->video_id), *inst, provider);
        if (order_v.front() == inst->target_index) ++correct;
      }
      val_acc = static_cast<double>(correct) / static_cast<double>(val_insts.size());
    }
    log.val_accuracy.push_back(val_acc);
    if (val_acc > log.best_val_accuracy) {
      log.best_val_accuracy = val_acc;
      log.best_epoch = epoch;
      best = params_;
    }
  }
  if (log.best_epoch >= 0) params_ = best;
  return log;
}

metrics::EvalReport GroundingModel::evaluate(const Dataset& data, const std::string& split,
                                             const FeatureProvider& provider,
                                             const std::set<std::string>* disabled) const {
  const auto insts = data.split_instances(split);
  std::vector<GroundingInstance> copy;
  std::vector<int> preds;
  for (const auto* inst : insts) {
    copy.push_back(*inst);
    preds.push_back(rank(*data.video(inst->video_id), *inst, provider, nullptr, disabled).front());
  }
  auto rep = metrics::eval_localization(preds, copy);
  if (disabled) {
    const auto mods = cfg_.active_modules();
    rep.all_modules_disabled = disabled->size() == mods.size();
  }
  return rep;
}

metrics::EvalReport GroundingModel::evaluate_tubelets(
    const Dataset& data, const std::string& split, const FeatureProvider& provider,
    const std::vector<GroundingInstance>* scored_instances, double iou_threshold) const {
  const auto insts = data.split_instances(split);
  std::vector<GroundingInstance> clean;
  for (const auto* inst : insts) clean.push_back(*inst);
  const std::vector<GroundingInstance>& scored = scored_instances ? *scored_instances : clean;
  if (scored.size() != clean.size())
    throw Error("scored instance count does not match split size");

  std::vector<std::optional<Tubelet>> preds;
  for (size_t i = 0; i < scored.size(); ++i) {
    const auto order = rank(*data.video(scored[i].video_id), scored[i], provider);
    preds.push_back(scored[i].candidates[static_cast<size_t>(order.front())]);
  }
  return metrics::eval_tubelet_detection(preds, clean, iou_threshold);
}

ad::Var GroundingModel::score_on_tape(ad::Tape& t, const lang::EncoderOutput& enc,
                                      const CandidateFeatures& cf, int frame_stride) const {
  return ModelTape::score_candidate(t, *this, enc, cf, frame_stride).total;
}

lang::LanguageEncoding GroundingModel::encode_only(const Expression& expr) const {
  if (!initialized_) throw Error("model not initialized");
  ad::Tape t;
  lang::EncoderConfig ec{cfg_.embed_dim, cfg_.hidden_dim, cfg_.active_modules()};
  auto& ps = const_cast<ad::ParamStore&>(params_);
  const auto enc = lang::encode_expression(t, ps, ec, vocab_, expr);
  return lang::extract_encoding(t, enc, ec);
}

void GroundingModel::save(const std::string& path) const {
  json j;
  j["format"] = "stvg-params/1";
  j["config"] = {{"variant", cfg_.variant},
                 {"embed_dim", cfg_.embed_dim},
                 {"hidden_dim", cfg_.hidden_dim},
                 {"mloc_hidden", cfg_.mloc_hidden},
                 {"relseq_hidden", cfg_.relseq_hidden},
                 {"relseq_out", cfg_.relseq_out},
                 {"margin", cfg_.margin},
                 {"lambda1", cfg_.lambda1},
                 {"lambda2", cfg_.lambda2},
                 {"lambda_att", cfg_.lambda_att},
                 {"lr", cfg_.lr},
                 {"momentum", cfg_.momentum},
                 {"epochs", cfg_.epochs},
                 {"train_frame_stride", cfg_.train_frame_stride},
                 {"seed", cfg_.seed},
                 {"appearance_dim", cfg_.appearance_dim}};
  j["vocab"] = vocab_.words();
  j["attr_vocab"] = attr_vocab_;
  json tensors = json::array();
  for (const auto& [name, t] : params_.tensors())
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"data", t.value}});
  j["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

GroundingModel GroundingModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("bad parameter file: ") + e.what());
  }
  if (j.value("format", "") != "stvg-params/1")
    throw ParseError(1, "unsupported parameter format");
  const auto& jc = j.at("config");
  ModelConfig cfg;
  cfg.variant = jc.at("variant").get<std::string>();
  cfg.embed_dim = jc.at("embed_dim").get<int>();
  cfg.hidden_dim = jc.at("hidden_dim").get<int>();
  cfg.mloc_hidden = jc.at("mloc_hidden").get<int>();
  cfg.relseq_hidden = jc.at("relseq_hidden").get<int>();
  cfg.relseq_out = jc.at("relseq_out").get<int>();
  cfg.margin = jc.at("margin").get<double>();
  cfg.lambda1 = jc.at("lambda1").get<double>();
  cfg.lambda2 = jc.at("lambda2").get<double>();
  cfg.lambda_att = jc.at("lambda_att").get<double>();
  cfg.lr = jc.at("lr").get<double>();
  cfg.momentum = jc.at("momentum").get<double>();
  cfg.epochs = jc.at("epochs").get<int>();
  cfg.train_frame_stride = jc.at("train_frame_stride").get<int>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  cfg.appearance_dim = jc.at("appearance_dim").get<int>();

  GroundingModel m(cfg);
  m.vocab_ = lang::Vocab::from_words(j.at("vocab").get<std::vector<std::string>>());
  m.attr_vocab_ = j.at("attr_vocab").get<std::vector<std::string>>();
  for (const auto& jt : j.at("tensors")) {
    ad::Tensor& t = m.params_.create(jt.at("name").get<std::string>(),
                                     jt.at("shape").get<std::vector<int>>());
    t.value = jt.at("data").get<std::vector<double>>();
    if (t.value.size() != t.grad.size())
      throw ParseError(1, "tensor data does not match shape: " + t.name);
  }
  m.initialized_ = true;
  return m;
}

}  // namespace stvg::model
