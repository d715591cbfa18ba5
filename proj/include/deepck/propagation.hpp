#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deepck/depth_metrics.hpp"
#include "deepck/nn/layers.hpp"

namespace deepck {

/// Hypernym forest: each term has at most one parent. Terms are matched after
/// lowercasing and whitespace normalization.
class TaxonomyTree {
 public:
  static TaxonomyTree from_edges(const std::vector<std::pair<std::string, std::string>>& child_parent) {
    TaxonomyTree t;
    for (const auto& [c, p] : child_parent) {
      const auto ck = t.intern(c), pk = t.intern(p);
      if (ck == pk) throw InvalidArgument("taxonomy term '" + c + "' is its own parent");
      if (auto it = t.parent_.find(ck); it != t.parent_.end()) {
        if (it->second != pk) throw InvalidArgument("taxonomy term '" + c + "' has two parents");
        continue;
      }
      t.parent_[ck] = pk;
      t.children_[pk].push_back(ck);
    }
    for (auto& [k, kids] : t.children_) std::sort(kids.begin(), kids.end());
    // Acyclic: every upward walk must end within |nodes| steps.
    for (const auto& [k, name] : t.names_) {
      std::size_t steps = 0;
      for (auto cur = t.parent_of(k); cur; cur = t.parent_of(*cur))
        if (++steps > t.names_.size()) throw InvalidArgument("taxonomy contains a cycle through '" + name + "'");
    }
    return t;
  }

  /// "child\tparent" lines; blank lines and '#' comments skipped.
  static TaxonomyTree read(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      text::strip_cr(line);
      if (text::trim(line).empty() || line.front() == '#') continue;
      const auto f = text::split(line, '\t');
      if (f.size() != 2 || text::trim(f[0]).empty() || text::trim(f[1]).empty())
        throw ParseError(lineno, "expected 'child<TAB>parent'");
      edges.emplace_back(std::string(text::trim(f[0])), std::string(text::trim(f[1])));
    }
    try {
      return from_edges(edges);
    } catch (const InvalidArgument& e) {
      throw ParseError(0, e.what());
    }
  }

  static std::string normalize(std::string_view term) { return text::to_lower(text::normalize_ws(term)); }

  bool contains(std::string_view term) const { return names_.contains(normalize(term)); }
  std::size_t size() const { return names_.size(); }

  /// Display spelling of a normalized key.
  const std::string& name(const std::string& key) const { return names_.at(key); }

  std::optional<std::string> parent_of(const std::string& key) const {
    auto it = parent_.find(key);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& children_of(const std::string& key) const {
    static const std::vector<std::string> none;
    auto it = children_.find(key);
    return it == children_.end() ? none : it->second;
  }

  /// Normalized keys of all nodes, sorted.
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, n] : names_) out.push_back(k);
    return out;
  }

 private:
  std::string intern(const std::string& term) {
    auto k = normalize(term);
    names_.emplace(k, text::normalize_ws(term));
    return k;
  }

  std::map<std::string, std::string> names_;
  std::unordered_map<std::string, std::string> parent_;
  std::unordered_map<std::string, std::vector<std::string>> children_;
};

enum class Provenance { generated, horizontal, vertical };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::generated: return "generated";
    case Provenance::horizontal: return "horizontal";
    case Provenance::vertical: return "vertical";
  }
  return "?";
}

struct CandidateTriple {
  LabeledTriple triple;  // unlabeled
  Provenance provenance = Provenance::generated;
  std::string source_head;
  std::optional<std::size_t> distance;  // propagated candidates only
  std::optional<double> depth_rank;
};

namespace detail {

/// Keyed candidate set: one entry per triple key, keeping the smallest distance and
/// then the smallest source head.
class CandidateSet {
 public:
  void offer(CandidateTriple c) {
    const auto key = c.triple.key();
    auto it = items_.find(key);
    if (it == items_.end()) {
      items_.emplace(key, std::move(c));
      return;
    }
    auto rank = [](const CandidateTriple& x) {
      return std::tuple(x.distance.value_or(0), TaxonomyTree::normalize(x.source_head));
    };
    if (rank(c) < rank(it->second)) it->second = std::move(c);
  }

  std::vector<CandidateTriple> take() {
    std::vector<CandidateTriple> out;
    for (auto& [k, c] : items_) out.push_back(std::move(c));
    return out;
  }

 private:
  std::map<std::string, CandidateTriple> items_;
};

}  // namespace detail

/// Copies each source attribute (relation, tail) to the head's same-generation relatives:
/// distance j covers nodes whose closest common ancestor with the head is j generations
/// up (1 = siblings, 2 = cousins), for j <= max_distance.
inline std::vector<CandidateTriple> horizontal_propagate(const TaxonomyTree& tree,
                                                         const std::vector<CandidateTriple>& source,
                                                         std::size_t max_distance = 1) {
  if (max_distance < 1) throw InvalidArgument("max_distance must be >= 1");
  detail::CandidateSet out;
  for (const auto& s : source) {
    const auto h = TaxonomyTree::normalize(s.triple.head);
    if (!tree.contains(h)) continue;
    std::string below = h;  // ancestor at generation j-1
    auto anc = tree.parent_of(h);
    for (std::size_t j = 1; j <= max_distance && anc; ++j) {
      // nodes exactly j generations under `anc`, skipping the branch through `below`
      std::vector<std::string> frontier;
      for (const auto& c : tree.children_of(*anc))
        if (c != below) frontier.push_back(c);
      for (std::size_t g = 1; g < j; ++g) {
        std::vector<std::string> next;
        for (const auto& f : frontier)
          for (const auto& c : tree.children_of(f)) next.push_back(c);
        frontier = std::move(next);
      }
      for (const auto& node : frontier) {
        out.offer({LabeledTriple::make(tree.name(node), s.triple.relation, s.triple.tail), Provenance::horizontal,
                   s.triple.head, j, std::nullopt});
      }
      below = *anc;
      anc = tree.parent_of(*anc);
    }
  }
  return out.take();
}

/// Copies each source attribute to every descendant within max_distance generations.
inline std::vector<CandidateTriple> vertical_propagate(const TaxonomyTree& tree,
                                                       const std::vector<CandidateTriple>& source,
                                                       std::size_t max_distance = 1) {
  if (max_distance < 1) throw InvalidArgument("max_distance must be >= 1");
  detail::CandidateSet out;
  for (const auto& s : source) {
    const auto h = TaxonomyTree::normalize(s.triple.head);
    if (!tree.contains(h)) continue;
    std::vector<std::string> frontier{h};
    for (std::size_t g = 1; g <= max_distance && !frontier.empty(); ++g) {
      std::vector<std::string> next;
      for (const auto& f : frontier)
        for (const auto& c : tree.children_of(f)) {
          out.offer({LabeledTriple::make(tree.name(c), s.triple.relation, s.triple.tail), Provenance::vertical,
                     s.triple.head, g, std::nullopt});
          next.push_back(c);
        }
      frontier = std::move(next);
    }
  }
  return out.take();
}

/// Union of horizontal and vertical outputs; a triple reached both ways keeps the
/// horizontal record on equal distance.
inline std::vector<CandidateTriple> propagate(const TaxonomyTree& tree, const std::vector<CandidateTriple>& source,
                                              std::size_t horizontal_distance = 1, std::size_t vertical_distance = 1) {
  auto h = horizontal_propagate(tree, source, horizontal_distance);
  auto v = vertical_propagate(tree, source, vertical_distance);
  std::map<std::string, CandidateTriple> merged;
  for (auto& c : h) merged.emplace(c.triple.key(), std::move(c));
  for (auto& c : v) {
    auto it = merged.find(c.triple.key());
    if (it == merged.end())
      merged.emplace(c.triple.key(), std::move(c));
    else if (*c.distance < *it->second.distance)
      it->second = std::move(c);
  }
  std::vector<CandidateTriple> out;
  for (auto& [k, c] : merged) out.push_back(std::move(c));
  return out;
}

struct Hypothesis {
  std::vector<lm::TokenId> tokens;  // includes the end-of-term token when it ended there
  double logprob = 0.0;
};

inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

/// Length-capped beam search. A hypothesis finishes on the backend's end-of-term token
/// or at max_len tokens. Zero-probability extensions are never kept. Results are
/// ordered by total log-probability, then lexicographically by token ids.
inline std::vector<Hypothesis> beam_search(const lm::TokenSequence& prefix, const lm::Backend& backend,
                                           std::size_t width, std::size_t max_len) {
  if (width < 1) throw InvalidArgument("beam width must be >= 1");
  if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
  lm::require_scoring(backend);
  const auto eot = backend.descriptor().end_of_term;
  std::vector<Hypothesis> live{{{}, 0.0}}, finished;
  for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> cands;
    for (const auto& h : live) {
      auto ctx = prefix;
      for (auto id : h.tokens) ctx.push_back(id);
      const auto dist = backend.next_token_logprobs(ctx);
      for (std::size_t v = 0; v < dist.size(); ++v) {
        if (std::isinf(dist.logprobs[v])) continue;
        Hypothesis n = h;
        n.tokens.push_back(static_cast<lm::TokenId>(v));
        n.logprob += dist.logprobs[v];
        cands.push_back(std::move(n));
      }
    }
    const auto keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      hypothesis_before);
    cands.resize(keep);
    live.clear();
    for (auto& c : cands) {
      if ((eot && c.tokens.back() == *eot) || step == max_len)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
  }
  std::sort(finished.begin(), finished.end(), hypothesis_before);
  if (finished.size() > width) finished.resize(width);
  return finished;
}

/// Generator input: head tokens, relation phrase tokens, then (when training) tail tokens
/// and the end-of-term token.
inline lm::TokenSequence generator_prefix(const std::string& head, const std::string& relation,
                                          const lm::Backend& backend) {
  return backend.tokenize(text::normalize_ws(head) + ' ' + rephrase_relation(relation).phrase);
}

struct GeneratorReport {
  std::vector<double> loss_curve;  // mean tail NLL per step
};

/// Fine-tunes `backend` on the tail tokens (and closing end-of-term token) of each
/// triple; head and relation positions carry no loss. Each step is one gradient step
/// over a minibatch of `batch_size` triples (0 = all).
inline GeneratorReport train_generator(const std::vector<LabeledTriple>& triples, lm::TrainableScorer& backend,
                                       std::size_t steps, std::uint64_t seed, double learning_rate = 0.5,
                                       std::size_t batch_size = 0) {
  if (triples.empty()) throw InvalidArgument("no triples to train the generator on");
  if (!backend.descriptor().supports_training) throw CapabilityError("generator backend is not trainable");
  const auto eot = backend.descriptor().end_of_term;
  if (!eot) throw CapabilityError("generator backend has no end-of-term token");
  std::vector<lm::TokenSequence> seqs;
  std::vector<std::vector<bool>> masks;
  for (const auto& t : triples) {
    auto seq = generator_prefix(t.head, t.relation, backend);
    std::vector<bool> mask(seq.size(), false);
    for (auto id : backend.tokenize(text::normalize_ws(t.tail)).ids) {
      seq.push_back(id);
      mask.push_back(true);
    }
    seq.push_back(*eot);
    mask.push_back(true);
    seqs.push_back(std::move(seq));
    masks.push_back(std::move(mask));
  }
  GeneratorReport report;
  nn::Rng rng(seed);
  const std::size_t batch = batch_size == 0 ? triples.size() : std::min(batch_size, triples.size());
  for (std::size_t s = 0; s < steps; ++s) {
    double nll = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto i = batch == triples.size() ? b : rng.index(triples.size());
      std::vector<char> m(masks[i].begin(), masks[i].end());
      const std::span<const bool> mask(reinterpret_cast<const bool*>(m.data()), m.size());
      nll += backend.accumulate_masked_nll(seqs[i], mask);
    }
    nll /= static_cast<double>(batch);
    if (!std::isfinite(nll)) throw TrainingError("non-finite generator loss at step " + std::to_string(s + 1));
    backend.apply_gradients(learning_rate / static_cast<double>(batch));
    report.loss_curve.push_back(nll);
  }
  return report;
}

/// Decodes `width` tails per (head, relation) pair; empty tails are dropped and
/// duplicate triples collapse.
inline std::vector<CandidateTriple> generate_candidates(const std::vector<std::pair<std::string, std::string>>& pairs,
                                                        const lm::Backend& backend, std::size_t width,
                                                        std::size_t max_len) {
  detail::CandidateSet out;
  const auto eot = backend.descriptor().end_of_term;
  for (const auto& [head, relation] : pairs) {
    const auto prefix = generator_prefix(head, relation, backend);
    for (auto& hyp : beam_search(prefix, backend, width, max_len)) {
      if (eot && !hyp.tokens.empty() && hyp.tokens.back() == *eot) hyp.tokens.pop_back();
      const auto tail = text::normalize_ws(backend.detokenize(hyp.tokens));
      if (tail.empty()) continue;
      out.offer({LabeledTriple::make(head, relation, tail), Provenance::generated, head, std::nullopt, std::nullopt});
    }
  }
  return out.take();
}

struct DeepCandidates {
  std::vector<CandidateTriple> kept;      // depth_rank desc
  std::vector<std::string> diagnostics;   // candidates dropped on scoring errors
};

/// S2 minus S1, scored by depth rank and kept when strictly above `threshold`.
inline DeepCandidates build_deep_candidates(const std::vector<CandidateTriple>& s1,
                                            const std::vector<CandidateTriple>& s2, const lm::Backend& scorer,
                                            double threshold) {
  std::unordered_set<std::string> seen;
  for (const auto& c : s1) seen.insert(c.triple.key());
  DeepCandidates out;
  for (const auto& c : s2) {
    if (!seen.insert(c.triple.key()).second) continue;
    try {
      auto scored = c;
      scored.depth_rank = depth_rank(c.triple, scorer);
      if (*scored.depth_rank > threshold) out.kept.push_back(std::move(scored));
    } catch (const Error& e) {
      out.diagnostics.push_back(c.triple.key() + ": " + e.what());
    }
  }
  std::stable_sort(out.kept.begin(), out.kept.end(), [](const auto& a, const auto& b) {
    if (*a.depth_rank != *b.depth_rank) return *a.depth_rank > *b.depth_rank;
    return a.triple.key() < b.triple.key();
  });
  return out;
}

inline constexpr std::size_t kNegativeSampleAttempts = 1000;

/// Corrupts one field (head, relation or tail, uniformly) of a random positive with a
/// value observed in that field, resampling until the result is not a positive.
inline std::vector<LabeledTriple> negative_sample(const std::vector<LabeledTriple>& positives, std::size_t count,
                                                  std::uint64_t seed) {
  if (positives.empty()) throw InvalidArgument("negative sampling needs positives");
  std::unordered_set<std::string> known;
  std::set<std::string> heads, relations, tails;
  for (const auto& p : positives) {
    known.insert(p.key());
    heads.insert(p.head);
    relations.insert(p.relation);
    tails.insert(p.tail);
  }
  const std::vector<std::vector<std::string>> vocab{{heads.begin(), heads.end()},
                                                    {relations.begin(), relations.end()},
                                                    {tails.begin(), tails.end()}};
  nn::Rng rng(seed);
  std::vector<LabeledTriple> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    bool found = false;
    for (std::size_t attempt = 0; attempt < kNegativeSampleAttempts && !found; ++attempt) {
      auto t = positives[rng.index(positives.size())].unlabeled();
      const auto field = rng.index(3);
      const auto& values = vocab[field];
      const auto& v = values[rng.index(values.size())];
      (field == 0 ? t.head : field == 1 ? t.relation : t.tail) = v;
      if (known.contains(t.key())) continue;
      t.label = 0;
      out.push_back(std::move(t));
      found = true;
    }
    if (!found)
      throw SaturationError("could not produce a triple outside the positives after " +
                            std::to_string(kNegativeSampleAttempts) + " attempts");
  }
  return out;
}

inline void write_candidates_tsv(std::ostream& out, const std::vector<CandidateTriple>& cands,
                                 bool with_label_column = false) {
  out << "head\trelation\ttail\tprovenance\tsource_head\tdistance\tdepth_rank";
  if (with_label_column) out << "\tlabel";
  out << '\n';
  for (const auto& c : cands) {
    out << c.triple.head << '\t' << c.triple.relation << '\t' << c.triple.tail << '\t' << to_string(c.provenance)
        << '\t' << c.source_head << '\t' << (c.distance ? std::to_string(*c.distance) : "") << '\t'
        << (c.depth_rank ? format_number(*c.depth_rank) : "");
    if (with_label_column) out << '\t';
    out << '\n';
  }
}

}  // namespace deepck
