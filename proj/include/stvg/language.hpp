#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "stvg/autodiff.hpp"
#include "stvg/types.hpp"

namespace stvg::lang {

// Token vocabulary; id 0 is the shared OOV token.
class Vocab {
 public:
  Vocab() { words_ = {"<oov>"}; }
  static Vocab build(const std::vector<const GroundingInstance*>& instances);
  static Vocab from_words(std::vector<std::string> words);

  int id(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? 0 : it->second;
  }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

// Plain-double record of one encoded expression (interpretability output).
struct LanguageEncoding {
  std::vector<std::vector<double>> word_embeddings;        // T x E
  std::vector<std::vector<double>> hidden_states;          // T x 2H
  std::map<std::string, std::vector<double>> attentions;   // module -> length T
  std::vector<double> module_weights;                      // per active module
  std::map<std::string, std::vector<double>> queries;      // module -> E
};

struct EncoderConfig {
  int embed_dim = 32;
  int hidden_dim = 32;
  std::vector<std::string> modules;  // active module names, canonical order
};

// Tape handles for one encoded expression.
struct EncoderOutput {
  std::vector<ad::Var> embeddings;  // per token, dim E
  std::vector<ad::Var> hidden;      // per token, dim 2H
  ad::Var weights;                  // dim M (post-mask when a mask is given)
  std::vector<ad::Var> attention;   // per module, dim T
  std::vector<ad::Var> query;       // per module, dim E
};

void create_encoder_params(ad::ParamStore& ps, const EncoderConfig& cfg, int vocab_size,
                           Rng& rng);

// Bi-directional recurrent encoder; per-module attention over hidden states;
// module weights from the first+last hidden states. `weight_mask`, when
// non-empty, multiplies the softmaxed weights elementwise (ablation).
EncoderOutput encode_expression(ad::Tape& t, ad::ParamStore& ps, const EncoderConfig& cfg,
                                const Vocab& vocab, const Expression& expr,
                                std::span<const double> weight_mask = {});

LanguageEncoding extract_encoding(const ad::Tape& t, const EncoderOutput& enc,
                                  const EncoderConfig& cfg);

struct AttentionTable {
  // tag -> module -> mean attention over all tokens carrying the tag
  std::map<std::string, std::map<std::string, double>> by_tag;
  std::map<std::string, int> tag_counts;
  std::map<std::string, double> verbs;  // rollup over tags starting with VB

  std::string pretty(const std::vector<std::string>& modules) const;
};

AttentionTable aggregate_attention_by_pos(const std::vector<LanguageEncoding>& encodings,
                                          const std::vector<Expression>& expressions);

}  // namespace stvg::lang
