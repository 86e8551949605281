#include "stvg/language.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "stvg/errors.hpp"

namespace stvg::lang {

Vocab Vocab::build(const std::vector<const GroundingInstance*>& instances) {
  std::set<std::string> seen;
  for (const auto* inst : instances)
    for (const auto& tok : inst->expression.tokens) seen.insert(tok);
  std::vector<std::string> words{"<oov>"};
  words.insert(words.end(), seen.begin(), seen.end());
  return from_words(std::move(words));
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  Vocab v;
  v.words_ = std::move(words);
  v.index_.clear();
  for (int i = 0; i < static_cast<int>(v.words_.size()); ++i) v.index_[v.words_[static_cast<size_t>(i)]] = i;
  return v;
}

void create_encoder_params(ad::ParamStore& ps, const EncoderConfig& cfg, int vocab_size,
                           Rng& rng) {
  ad::Tensor& emb = ps.create("lang.embed", {vocab_size, cfg.embed_dim});
  ad::init_uniform(emb, rng, 0.5);
  ad::make_lstm(ps, "lang.fwd", cfg.embed_dim, cfg.hidden_dim, rng);
  ad::make_lstm(ps, "lang.bwd", cfg.embed_dim, cfg.hidden_dim, rng);
  for (const auto& m : cfg.modules) {
    ad::Tensor& w = ps.create("lang.attn." + m + ".W", {1, 2 * cfg.hidden_dim});
    ad::init_uniform(w, rng);
    ps.create("lang.attn." + m + ".b", {1});
  }
  ad::Tensor& ww = ps.create("lang.wmod.W",
                             {static_cast<int>(cfg.modules.size()), 4 * cfg.hidden_dim});
  ad::init_uniform(ww, rng);
  ps.create("lang.wmod.b", {static_cast<int>(cfg.modules.size())});
}

EncoderOutput encode_expression(ad::Tape& t, ad::ParamStore& ps, const EncoderConfig& cfg,
                                const Vocab& vocab, const Expression& expr,
                                std::span<const double> weight_mask) {
  if (expr.tokens.empty()) throw Error("encode_expression: empty token list");
  const int T = static_cast<int>(expr.tokens.size());

  EncoderOutput out;
  ad::Tensor& emb = ps.at("lang.embed");
  for (const auto& tok : expr.tokens) out.embeddings.push_back(t.param(emb, vocab.id(tok)));

  const ad::LstmParams fwd = ad::get_lstm(ps, "lang.fwd", cfg.hidden_dim);
  const ad::LstmParams bwd = ad::get_lstm(ps, "lang.bwd", cfg.hidden_dim);
  std::vector<ad::Var> hf(static_cast<size_t>(T)), hb(static_cast<size_t>(T));
  ad::LstmState s = ad::lstm_zero_state(t, cfg.hidden_dim);
  for (int i = 0; i < T; ++i) {
    s = ad::lstm_step(t, fwd, out.embeddings[static_cast<size_t>(i)], s);
    hf[static_cast<size_t>(i)] = s.h;
  }
  s = ad::lstm_zero_state(t, cfg.hidden_dim);
  for (int i = T - 1; i >= 0; --i) {
    s = ad::lstm_step(t, bwd, out.embeddings[static_cast<size_t>(i)], s);
    hb[static_cast<size_t>(i)] = s.h;
  }
  for (int i = 0; i < T; ++i) {
    std::array<ad::Var, 2> parts{hf[static_cast<size_t>(i)], hb[static_cast<size_t>(i)]};
    out.hidden.push_back(t.concat(parts));
  }

  // per-module attention over tokens, then q^m as the attention-weighted sum
  // of word embeddings
  for (const auto& m : cfg.modules) {
    ad::Tensor& W = ps.at("lang.attn." + m + ".W");
    ad::Tensor& b = ps.at("lang.attn." + m + ".b");
    std::vector<ad::Var> logits;
    logits.reserve(static_cast<size_t>(T));
    for (int i = 0; i < T; ++i) logits.push_back(t.affine(W, &b, out.hidden[static_cast<size_t>(i)]));
    ad::Var a = t.softmax(t.concat(logits));
    out.attention.push_back(a);
    out.query.push_back(t.weighted_sum(out.embeddings, a));
  }

  // module weights from the first and last hidden states
  std::array<ad::Var, 2> ends{out.hidden.front(), out.hidden.back()};
  ad::Var w = t.softmax(t.affine(ps.at("lang.wmod.W"), &ps.at("lang.wmod.b"), t.concat(ends)));
  if (!weight_mask.empty()) {
    if (weight_mask.size() != cfg.modules.size()) throw Error("weight mask size mismatch");
    w = t.mul(w, t.input(weight_mask));
  }
  out.weights = w;
  return out;
}

LanguageEncoding extract_encoding(const ad::Tape& t, const EncoderOutput& enc,
                                  const EncoderConfig& cfg) {
  LanguageEncoding e;
  for (const auto& v : enc.embeddings) {
    auto s = t.values(v);
    e.word_embeddings.emplace_back(s.begin(), s.end());
  }
  for (const auto& v : enc.hidden) {
    auto s = t.values(v);
    e.hidden_states.emplace_back(s.begin(), s.end());
  }
  for (size_t m = 0; m < cfg.modules.size(); ++m) {
    auto a = t.values(enc.attention[m]);
    e.attentions[cfg.modules[m]] = {a.begin(), a.end()};
    auto q = t.values(enc.query[m]);
    e.queries[cfg.modules[m]] = {q.begin(), q.end()};
  }
  auto w = t.values(enc.weights);
  e.module_weights = {w.begin(), w.end()};
  return e;
}

AttentionTable aggregate_attention_by_pos(const std::vector<LanguageEncoding>& encodings,
                                          const std::vector<Expression>& expressions) {
  if (encodings.size() != expressions.size())
    throw Error("aggregate_attention_by_pos: encodings not parallel to expressions");
  AttentionTable table;
  std::map<std::string, std::map<std::string, double>> sums;
  std::map<std::string, int> counts;
  std::map<std::string, double> verb_sums;
  std::map<std::string, int> verb_counts;

  for (size_t i = 0; i < encodings.size(); ++i) {
    const auto& expr = expressions[i];
    for (const auto& [module, attn] : encodings[i].attentions) {
      if (attn.size() != expr.pos.size())
        throw Error("aggregate_attention_by_pos: attention not parallel to tags");
      for (size_t tk = 0; tk < attn.size(); ++tk) {
        const std::string& tag = expr.pos[tk];
        sums[tag][module] += attn[tk];
        if (tag.rfind("VB", 0) == 0) {
          verb_sums[module] += attn[tk];
          verb_counts[module] += 1;
        }
      }
    }
    if (!expr.pos.empty())
      for (const auto& tag : expr.pos) counts[tag] += 1;
  }

  for (const auto& [tag, per_module] : sums) {
    for (const auto& [module, sum] : per_module)
      table.by_tag[tag][module] = sum / counts[tag];
    table.tag_counts[tag] = counts[tag];
  }
  for (const auto& [module, sum] : verb_sums)
    table.verbs[module] = sum / verb_counts[module];
  return table;
}

std::string AttentionTable::pretty(const std::vector<std::string>& modules) const {
  std::ostringstream os;
  char buf[64];
  os << "tag      count";
  for (const auto& m : modules) {
    std::snprintf(buf, sizeof(buf), " %12s", m.c_str());
    os << buf;
  }
  os << "\n";
  for (const auto& [tag, per_module] : by_tag) {
    std::snprintf(buf, sizeof(buf), "%-8s %5d", tag.c_str(), tag_counts.at(tag));
    os << buf;
    for (const auto& m : modules) {
      auto it = per_module.find(m);
      if (it == per_module.end())
        std::snprintf(buf, sizeof(buf), " %12s", "-");
      else
        std::snprintf(buf, sizeof(buf), " %12.4f", it->second);
      os << buf;
    }
    os << "\n";
  }
  if (!verbs.empty()) {
    std::snprintf(buf, sizeof(buf), "%-8s %5s", "VB*", "");
    os << buf;
    for (const auto& m : modules) {
      auto it = verbs.find(m);
      if (it == verbs.end())
        std::snprintf(buf, sizeof(buf), " %12s", "-");
      else
        std::snprintf(buf, sizeof(buf), " %12.4f", it->second);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace stvg::lang
