#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "stvg/types.hpp"

namespace stvg::chunk {

// Shallow chunk over a token range [begin, end).
struct ChunkSpan {
  std::string label;  // NP | VP | PP | ADVP | CONJP | O
  int begin = 0;
  int end = 0;

  bool operator==(const ChunkSpan&) const = default;
};

struct ChunkedExpression {
  Expression expression;
  std::vector<ChunkSpan> spans;  // ordered, non-overlapping, covering all tokens
};

struct Verdict {
  bool valid = false;
  std::set<std::string> missing;  // subset of {"NP","VP","PP|ADVP|CONJP"}
};

// Deterministic closed-lexicon tagger with suffix fallbacks:
// -ing -> VBG, -ly -> RB, -s after a known verb stem -> VBZ,
// -s after a known noun stem -> NNS, otherwise NN.
std::vector<std::string> pos_tag(const std::vector<std::string>& tokens);

// Longest-match left-to-right over the tag sequence:
//   CONJP = CC | "then"
//   PP    = IN NP
//   NP    = (DT)(JJ)*(NN|NNS)+
//   VP    = (VBZ|VBG|VBD|VBP|VB)(RB)*      (never absorbs "then")
//   ADVP  = RB+ outside a VP               (never absorbs "then")
// Uncovered tokens are labeled O.
ChunkedExpression chunk_expression(const Expression& expr);

// Valid iff chunks contain >=1 NP, >=1 VP and >=1 of {PP, ADVP, CONJP}.
Verdict validate(const Expression& expr);

// Token-level tag frequencies as percentages (sum 100 +- 0.1).
std::map<std::string, double> corpus_pos_stats(const std::vector<Expression>& corpus);

// Whitespace tokenizer for raw sentences: lowercases and splits trailing
// punctuation into its own token.
Expression tokenize(const std::string& raw);

}  // namespace stvg::chunk
