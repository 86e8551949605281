#include "stvg/chunker.hpp"

#include <algorithm>
#include <cctype>

#include "stvg/errors.hpp"

namespace stvg::chunk {

namespace {

const std::map<std::string, std::string>& lexicon() {
  static const std::map<std::string, std::string> kLex = {
      // determiners
      {"the", "DT"}, {"a", "DT"}, {"an", "DT"},
      // prepositions / subordinating conjunctions
      {"in", "IN"}, {"on", "IN"}, {"to", "IN"}, {"toward", "IN"}, {"towards", "IN"},
      {"near", "IN"}, {"behind", "IN"}, {"under", "IN"}, {"over", "IN"}, {"of", "IN"},
      {"from", "IN"}, {"at", "IN"}, {"down", "IN"}, {"up", "IN"}, {"into", "IN"},
      {"with", "IN"}, {"for", "IN"},
      // adjectives (color/size vocabulary)
      {"red", "JJ"}, {"blue", "JJ"}, {"green", "JJ"}, {"yellow", "JJ"},
      {"white", "JJ"}, {"black", "JJ"}, {"big", "JJ"}, {"small", "JJ"},
      // adverbs (non -ly closed class)
      {"still", "RB"}, {"then", "RB"}, {"around", "RB"}, {"away", "RB"},
      {"first", "RB"}, {"just", "RB"},
      // coordinating conjunctions
      {"and", "CC"}, {"but", "CC"}, {"or", "CC"},
      // pronouns
      {"he", "PRP"}, {"she", "PRP"}, {"it", "PRP"}, {"they", "PRP"},
      {"his", "PRP$"}, {"her", "PRP$"}, {"its", "PRP$"}, {"their", "PRP$"},
      // punctuation
      {".", "."}, {",", ","}, {"!", "."}, {"?", "."},
  };
  return kLex;
}

const std::set<std::string>& verb_stems() {
  static const std::set<std::string> kVerbs = {
      "move", "run",  "slide", "climb", "jump",  "turn", "remain", "stay",
      "start", "stop", "look",  "kick",  "hit",   "reach", "save",  "block",
      "slip", "drift", "walk", "go", "roll",
  };
  return kVerbs;
}

const std::set<std::string>& noun_stems() {
  static const std::set<std::string> kNouns = {
      "panda", "player", "dog",  "cat",    "bear", "fox",   "left",  "right",
      "top",   "bottom", "side", "place",  "net",  "ball",  "man",   "uniform",
      "slope", "edge",   "corner", "court", "frame", "object", "video",
  };
  return kNouns;
}

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

std::string tag_one(const std::string& token) {
  const auto& lex = lexicon();
  auto it = lex.find(token);
  if (it != lex.end()) return it->second;
  if (noun_stems().count(token)) return "NN";
  if (verb_stems().count(token)) return "VB";
  if (ends_with(token, "ing")) return "VBG";
  if (ends_with(token, "ly")) return "RB";
  if (token.size() > 1 && token.back() == 's') {
    const std::string stem = token.substr(0, token.size() - 1);
    if (verb_stems().count(stem)) return "VBZ";
    if (noun_stems().count(stem)) return "NNS";
    if (ends_with(token, "es") && token.size() > 2) {
      // "-es" forms like "reaches"
      const std::string stem2 = token.substr(0, token.size() - 2);
      if (verb_stems().count(stem2)) return "VBZ";
      if (noun_stems().count(stem2)) return "NNS";
    }
  }
  return "NN";
}

bool is_verb_tag(const std::string& t) {
  return t == "VBZ" || t == "VBG" || t == "VBD" || t == "VBP" || t == "VB";
}

bool is_noun_tag(const std::string& t) { return t == "NN" || t == "NNS"; }

}  // namespace

std::vector<std::string> pos_tag(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw Error("pos_tag: empty token list");
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(tag_one(t));
  return tags;
}

ChunkedExpression chunk_expression(const Expression& expr) {
  if (expr.tokens.empty()) throw Error("chunk: empty expression");
  Expression e = expr;
  if (e.pos.size() != e.tokens.size()) e.pos = pos_tag(e.tokens);

  const auto& tok = e.tokens;
  const auto& tag = e.pos;
  const int n = static_cast<int>(tok.size());

  // (DT)(JJ)*(NN|NNS)+ starting at i; returns end or -1
  auto match_np = [&](int i) -> int {
    int k = i;
    if (k < n && tag[static_cast<size_t>(k)] == "DT") ++k;
    while (k < n && tag[static_cast<size_t>(k)] == "JJ") ++k;
    int nouns = 0;
    while (k < n && is_noun_tag(tag[static_cast<size_t>(k)])) {
      ++k;
      ++nouns;
    }
    return nouns >= 1 ? k : -1;
  };

  ChunkedExpression out;
  out.expression = e;
  int i = 0;
  while (i < n) {
    const std::string& t = tag[static_cast<size_t>(i)];
    const std::string& w = tok[static_cast<size_t>(i)];
    if (t == "CC" || w == "then") {
      out.spans.push_back({"CONJP", i, i + 1});
      i += 1;
      continue;
    }
    if (t == "IN") {
      const int np_end = match_np(i + 1);
      if (np_end > 0) {
        out.spans.push_back({"PP", i, np_end});
        i = np_end;
        continue;
      }
    }
    if (const int np_end = match_np(i); np_end > 0) {
      out.spans.push_back({"NP", i, np_end});
      i = np_end;
      continue;
    }
    if (is_verb_tag(t)) {
      int k = i + 1;
      while (k < n && tag[static_cast<size_t>(k)] == "RB" && tok[static_cast<size_t>(k)] != "then")
        ++k;
      out.spans.push_back({"VP", i, k});
      i = k;
      continue;
    }
    if (t == "RB") {
      int k = i;
      while (k < n && tag[static_cast<size_t>(k)] == "RB" && tok[static_cast<size_t>(k)] != "then")
        ++k;
      if (k > i) {
        out.spans.push_back({"ADVP", i, k});
        i = k;
        continue;
      }
    }
    out.spans.push_back({"O", i, i + 1});
    i += 1;
  }
  return out;
}

Verdict validate(const Expression& expr) {
  Verdict v;
  if (expr.tokens.empty()) {
    v.missing = {"NP", "VP", "PP|ADVP|CONJP"};
    return v;
  }
  const ChunkedExpression ce = chunk_expression(expr);
  bool np = false, vp = false, third = false;
  for (const auto& s : ce.spans) {
    if (s.label == "NP") np = true;
    else if (s.label == "VP") vp = true;
    else if (s.label == "PP" || s.label == "ADVP" || s.label == "CONJP") third = true;
  }
  if (!np) v.missing.insert("NP");
  if (!vp) v.missing.insert("VP");
  if (!third) v.missing.insert("PP|ADVP|CONJP");
  v.valid = v.missing.empty();
  return v;
}

std::map<std::string, double> corpus_pos_stats(const std::vector<Expression>& corpus) {
  if (corpus.empty()) throw Error("corpus_pos_stats: empty corpus");
  std::map<std::string, int> counts;
  int total = 0;
  for (const auto& e : corpus) {
    const auto tags = e.pos.size() == e.tokens.size() ? e.pos : pos_tag(e.tokens);
    for (const auto& t : tags) {
      ++counts[t];
      ++total;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [t, c] : counts)
    out[t] = 100.0 * static_cast<double>(c) / static_cast<double>(total);
  return out;
}

Expression tokenize(const std::string& raw) {
  Expression e;
  e.raw = raw;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    // split one trailing punctuation mark off
    if (cur.size() > 1 && (cur.back() == '.' || cur.back() == ',' || cur.back() == '!' ||
                           cur.back() == '?')) {
      const char p = cur.back();
      cur.pop_back();
      e.tokens.push_back(cur);
      e.tokens.push_back(std::string(1, p));
    } else {
      e.tokens.push_back(cur);
    }
    cur.clear();
  };
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  if (!e.tokens.empty()) e.pos = pos_tag(e.tokens);
  return e;
}

}  // namespace stvg::chunk
