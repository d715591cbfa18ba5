#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "deepck/core_types.hpp"
#include "deepck/stopwords.hpp"

namespace deepck {

using SentenceId = std::size_t;

inline constexpr std::size_t kDefaultSentenceCap = 1000;

struct Sentence {
  SentenceId id = 0;
  std::string text;
  std::vector<std::string> tokens;  // lowercased word tokens, punctuation dropped
};

/// Immutable sentence store with an inverted index from token to sentence ids.
class Corpus {
 public:
  Corpus() = default;

  /// Sentences end at '.', '!' or '?' followed by whitespace or end of input.
  /// With `line_mode` every non-blank line is one sentence.
  static Corpus ingest(std::istream& in, bool line_mode = false) {
    std::vector<std::string> sentences;
    if (line_mode) {
      std::string line;
      while (std::getline(in, line)) {
        auto t = text::normalize_ws(line);
        if (!t.empty()) sentences.push_back(std::move(t));
      }
    } else {
      const std::string all{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      std::size_t start = 0;
      for (std::size_t i = 0; i < all.size(); ++i) {
        const char c = all[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == all.size() || text::is_space(all[i + 1]))) {
          auto t = text::normalize_ws(std::string_view(all).substr(start, i + 1 - start));
          if (!t.empty()) sentences.push_back(std::move(t));
          start = i + 1;
        }
      }
      auto rest = text::normalize_ws(std::string_view(all).substr(std::min(start, all.size())));
      if (!rest.empty()) sentences.push_back(std::move(rest));
    }
    return from_sentences(std::move(sentences));
  }

  static Corpus from_sentences(std::vector<std::string> texts) {
    Corpus c;
    c.sentences_.reserve(texts.size());
    for (auto& t : texts) {
      Sentence s{c.sentences_.size(), std::move(t), {}};
      s.tokens = text::content_words(s.text);
      std::vector<std::string> seen = s.tokens;
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (auto& tok : seen) c.index_[tok].push_back(s.id);
      c.sentences_.push_back(std::move(s));
    }
    return c;
  }

  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  const Sentence& sentence(SentenceId id) const { return sentences_.at(id); }
  const std::vector<Sentence>& sentences() const { return sentences_; }
  const std::unordered_map<std::string, std::vector<SentenceId>>& term_index() const { return index_; }

  /// Ids (ascending) of sentences holding `term` as a contiguous, case-insensitive token run.
  std::vector<SentenceId> find_sentences(std::string_view term) const {
    const auto needle = text::content_words(term);
    if (needle.empty()) throw InvalidArgument("search term has no word tokens");
    const std::vector<SentenceId>* rarest = nullptr;
    for (const auto& tok : needle) {
      auto it = index_.find(tok);
      if (it == index_.end()) return {};
      if (!rarest || it->second.size() < rarest->size()) rarest = &it->second;
    }
    std::vector<SentenceId> out;
    for (auto id : *rarest) {
      const auto& toks = sentences_[id].tokens;
      if (std::search(toks.begin(), toks.end(), needle.begin(), needle.end()) != toks.end())
        out.push_back(id);
    }
    return out;
  }

  void write_lines(std::ostream& out) const {
    for (const auto& s : sentences_) out << s.text << '\n';
  }

 private:
  std::vector<Sentence> sentences_;
  std::unordered_map<std::string, std::vector<SentenceId>> index_;
};

inline std::vector<std::string> content_set(const std::vector<std::string>& tokens,
                                            const StopWords& stopwords) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    auto lt = text::to_lower(t);
    if (!stopwords.contains(lt)) out.push_back(std::move(lt));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::size_t overlap_of_sets(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// Number of distinct non-stop-word token types the two sentences share.
inline std::size_t overlap_score(const std::vector<std::string>& s1, const std::vector<std::string>& s2,
                                 const StopWords& stopwords) {
  return overlap_of_sets(content_set(s1, stopwords), content_set(s2, stopwords));
}

/// A (head sentence, relation phrase, tail sentence) record. Sentence ids are empty
/// for the template fallback, whose sentences are the rendered triple itself.
struct EvidencePair {
  std::optional<SentenceId> head_sentence_id;
  std::optional<SentenceId> tail_sentence_id;
  std::size_t overlap = 0;
  RelationPhrase relation_phrase;

  bool is_fallback() const { return !head_sentence_id; }
  friend bool operator==(const EvidencePair&, const EvidencePair&) = default;
};

struct EvidenceSet {
  LabeledTriple triple;
  std::vector<EvidencePair> pairs;  // (overlap desc, head id asc, tail id asc)
  bool fallback_used = false;
};

inline std::string head_text(const EvidencePair& p, const Corpus& corpus, const LabeledTriple& t) {
  return p.head_sentence_id ? corpus.sentence(*p.head_sentence_id).text : render_template(t).text;
}

inline std::string tail_text(const EvidencePair& p, const Corpus& corpus, const LabeledTriple& t) {
  return p.tail_sentence_id ? corpus.sentence(*p.tail_sentence_id).text : render_template(t).text;
}

/// Keeps the `cap` most recent (highest id) sentences.
inline std::vector<SentenceId> cap_recent(std::vector<SentenceId> ids, std::size_t cap) {
  if (cap > 0 && ids.size() > cap) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(cap));
  return ids;
}

/// Top-K head/tail sentence pairs by word overlap. A sentence holding both terms may
/// pair with itself. With no candidate pair at all, one template pair is returned and
/// `fallback_used` is set.
inline EvidenceSet select_evidence(const LabeledTriple& triple, const Corpus& corpus, std::size_t k,
                                   const StopWords& stopwords,
                                   std::size_t sentence_cap = kDefaultSentenceCap) {
  if (k < 1) throw InvalidArgument("K must be >= 1");
  EvidenceSet out{triple, {}, false};
  const auto phrase = rephrase_relation(triple.relation);
  const auto heads = cap_recent(corpus.find_sentences(triple.head), sentence_cap);
  const auto tails = cap_recent(corpus.find_sentences(triple.tail), sentence_cap);

  std::unordered_map<SentenceId, std::vector<std::string>> sets;
  auto set_of = [&](SentenceId id) -> const std::vector<std::string>& {
    auto it = sets.find(id);
    if (it == sets.end()) it = sets.emplace(id, content_set(corpus.sentence(id).tokens, stopwords)).first;
    return it->second;
  };

  struct Cand {
    std::size_t overlap;
    SentenceId h, t;
  };
  std::vector<Cand> cands;
  cands.reserve(heads.size() * tails.size());
  for (auto h : heads)
    for (auto t : tails) cands.push_back({overlap_of_sets(set_of(h), set_of(t)), h, t});

  auto better = [](const Cand& a, const Cand& b) {
    return std::tuple(b.overlap, a.h, a.t) < std::tuple(a.overlap, b.h, b.t);
  };
  const std::size_t keep = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);
  for (std::size_t i = 0; i < keep; ++i)
    out.pairs.push_back({cands[i].h, cands[i].t, cands[i].overlap, phrase});

  if (out.pairs.empty()) {
    out.pairs.push_back({std::nullopt, std::nullopt, 0, phrase});
    out.fallback_used = true;
  }
  return out;
}

/// One JSON object per line per pair.
inline void write_evidence_jsonl(std::ostream& out, const EvidenceSet& ev) {
  for (std::size_t i = 0; i < ev.pairs.size(); ++i) {
    const auto& p = ev.pairs[i];
    nlohmann::ordered_json j;
    j["head"] = ev.triple.head;
    j["relation"] = ev.triple.relation;
    j["tail"] = ev.triple.tail;
    j["rank_k"] = i + 1;
    j["head_sentence_id"] = p.head_sentence_id ? nlohmann::ordered_json(*p.head_sentence_id) : nullptr;
    j["tail_sentence_id"] = p.tail_sentence_id ? nlohmann::ordered_json(*p.tail_sentence_id) : nullptr;
    j["overlap"] = p.overlap;
    j["fallback_used"] = ev.fallback_used;
    if (ev.triple.label) j["label"] = *ev.triple.label;
    out << j.dump() << '\n';
  }
}

/// Regroups evidence records (consecutive lines of one triple) into EvidenceSets.
inline std::vector<EvidenceSet> read_evidence_jsonl(std::istream& in) {
  std::vector<EvidenceSet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::optional<int> label;
      if (j.contains("label")) label = j.at("label").get<int>();
      auto triple = LabeledTriple::make(j.at("head").get<std::string>(), j.at("relation").get<std::string>(),
                                        j.at("tail").get<std::string>(), label);
      const auto rank = j.at("rank_k").get<std::size_t>();
      if (rank == 1) out.push_back({triple, {}, j.at("fallback_used").get<bool>()});
      if (out.empty() || out.back().triple.key() != triple.key() || rank != out.back().pairs.size() + 1)
        throw ParseError(lineno, "evidence records out of order");
      EvidencePair p;
      if (!j.at("head_sentence_id").is_null()) p.head_sentence_id = j.at("head_sentence_id").get<SentenceId>();
      if (!j.at("tail_sentence_id").is_null()) p.tail_sentence_id = j.at("tail_sentence_id").get<SentenceId>();
      p.overlap = j.at("overlap").get<std::size_t>();
      p.relation_phrase = rephrase_relation(triple.relation);
      out.back().pairs.push_back(p);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace deepck
