#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "deepck/core_types.hpp"
#include "deepck/lm/backend.hpp"

namespace deepck {

inline constexpr double kDefaultDeepThreshold = 2000.0;

struct DepthScore {
  LabeledTriple triple;
  double depth_rank = 1.0;
  double perplexity = 1.0;  // +inf when the backend gives some token zero probability
  std::string backend_name;

  bool perplexity_infinite() const { return std::isinf(perplexity); }
};

enum class DepthMetric { depth_rank, perplexity };

inline double metric_value(const DepthScore& s, DepthMetric m) {
  return m == DepthMetric::depth_rank ? s.depth_rank : s.perplexity;
}

namespace detail {

struct ScoredSentence {
  lm::TokenSequence tokens;
  std::size_t tail_begin = 0;  // first tail token; tail runs to the end
};

inline ScoredSentence tokenize_rendered(const LabeledTriple& triple, const lm::Backend& backend) {
  const auto rendered = render_template(triple);
  ScoredSentence out{backend.tokenize(rendered.text), 0};
  const auto& offs = out.tokens.offsets;
  std::size_t first = out.tokens.size();
  for (std::size_t i = 0; i < offs.size(); ++i) {
    if (offs[i].end > rendered.tail_chars.begin && offs[i].begin < rendered.tail_chars.end) {
      first = i;
      break;
    }
  }
  if (first == out.tokens.size())
    throw InvalidArgument("tail of (" + triple.head + ", " + triple.relation + ", " + triple.tail +
                          ") produced no tokens");
  out.tail_begin = first;
  return out;
}

}  // namespace detail

/// Mean 1-based rank of each tail token given everything before it (head, relation
/// phrase, earlier tail tokens). Ties rank by ascending token id.
inline double depth_rank(const LabeledTriple& triple, const lm::Backend& backend) {
  lm::require_scoring(backend);
  const auto s = detail::tokenize_rendered(triple, backend);
  double sum = 0.0;
  for (std::size_t i = s.tail_begin; i < s.tokens.size(); ++i) {
    const auto dist = backend.next_token_logprobs(s.tokens.prefix(i));
    sum += static_cast<double>(lm::token_rank(dist, s.tokens.ids[i]));
  }
  return sum / static_cast<double>(s.tokens.size() - s.tail_begin);
}

/// exp of the mean token NLL of the rendered sentence, conditioned on sequence start.
inline double perplexity(const LabeledTriple& triple, const lm::Backend& backend) {
  lm::require_scoring(backend);
  const auto seq = backend.tokenize(render_template(triple).text);
  if (seq.empty()) throw InvalidArgument("rendered sentence has no tokens");
  double nll = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto dist = backend.next_token_logprobs(seq.prefix(i));
    nll -= dist.logprobs[static_cast<std::size_t>(seq.ids[i])];
  }
  if (std::isinf(nll)) return std::numeric_limits<double>::infinity();
  return std::exp(nll / static_cast<double>(seq.size()));
}

/// Both metrics from one pass over the sentence.
inline DepthScore score_triple(const LabeledTriple& triple, const lm::Backend& backend) {
  lm::require_scoring(backend);
  const auto s = detail::tokenize_rendered(triple, backend);
  double nll = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto dist = backend.next_token_logprobs(s.tokens.prefix(i));
    const auto id = s.tokens.ids[i];
    nll -= dist.logprobs[static_cast<std::size_t>(id)];
    if (i >= s.tail_begin) rank_sum += static_cast<double>(lm::token_rank(dist, id));
  }
  const double n = static_cast<double>(s.tokens.size());
  DepthScore out;
  out.triple = triple;
  out.depth_rank = rank_sum / static_cast<double>(s.tokens.size() - s.tail_begin);
  out.perplexity = std::isinf(nll) ? std::numeric_limits<double>::infinity() : std::exp(nll / n);
  out.backend_name = backend.descriptor().name;
  return out;
}

/// Scores every triple, splitting the work across `workers` threads when the backend
/// allows concurrent reads. Output order matches input order.
inline std::vector<DepthScore> score_all(const std::vector<LabeledTriple>& triples,
                                         const lm::Backend& backend, unsigned workers = 1) {
  std::vector<DepthScore> out(triples.size());
  if (workers <= 1 || backend.descriptor().sharing != lm::Sharing::concurrent_reads ||
      triples.size() < 2) {
    for (std::size_t i = 0; i < triples.size(); ++i) out[i] = score_triple(triples[i], backend);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < triples.size(); i += workers)
          out[i] = score_triple(triples[i], backend);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Strictly greater than the threshold.
inline bool is_deep(const DepthScore& score, double threshold = kDefaultDeepThreshold) {
  return score.depth_rank > threshold;
}

struct BinStat {
  std::size_t bin_index = 0;
  double low = 0.0;   // [low, high)
  double high = 0.0;
  std::size_t member_count = 0;
  std::optional<double> mean_annotated_depth;
  double mean_metric = 0.0;
};

/// Annotated depth (1..4) keyed by LabeledTriple::key().
using AnnotationMap = std::unordered_map<std::string, double>;

/// Equal-frequency bins over the chosen metric. Bin sizes differ by at most one, the
/// larger bins first. Each bin's range runs from its smallest value to the next bin's
/// smallest value (the last bin is closed just above its maximum).
inline std::vector<BinStat> bin_statistics(const std::vector<DepthScore>& scores,
                                           const AnnotationMap* annotations, DepthMetric metric,
                                           std::size_t num_bins) {
  if (num_bins < 1) throw InvalidArgument("num_bins must be >= 1");
  if (scores.empty()) throw InvalidArgument("no scores to bin");
  if (num_bins > scores.size())
    throw InvalidArgument("num_bins (" + std::to_string(num_bins) + ") exceeds score count (" +
                          std::to_string(scores.size()) + ")");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return metric_value(scores[a], metric) < metric_value(scores[b], metric);
  });

  const std::size_t base = scores.size() / num_bins, extra = scores.size() % num_bins;
  std::vector<BinStat> bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    const std::size_t count = base + (b < extra ? 1 : 0);
    BinStat st;
    st.bin_index = b;
    st.member_count = count;
    double msum = 0.0, asum = 0.0;
    std::size_t acount = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
      const auto& s = scores[order[i]];
      msum += metric_value(s, metric);
      if (annotations) {
        if (auto it = annotations->find(s.triple.key()); it != annotations->end()) {
          asum += it->second;
          ++acount;
        }
      }
    }
    st.mean_metric = msum / static_cast<double>(count);
    if (acount > 0) st.mean_annotated_depth = asum / static_cast<double>(acount);
    st.low = metric_value(scores[order[pos]], metric);
    pos += count;
    st.high = pos < scores.size()
                  ? metric_value(scores[order[pos]], metric)
                  : std::nextafter(metric_value(scores[order[pos - 1]], metric),
                                   std::numeric_limits<double>::infinity());
    bins.push_back(st);
  }
  return bins;
}

/// Product-moment correlation.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
  if (x.size() < 2) throw InvalidArgument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("pearson: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct RelationProfile {
  std::string relation;
  double mean_depth_rank = 0.0;
  double stddev_depth_rank = 0.0;  // population
  std::size_t count = 0;
};

/// One profile per distinct relation, ordered by relation name.
inline std::vector<RelationProfile> relation_depth_profile(const std::vector<DepthScore>& scores) {
  if (scores.empty()) throw InvalidArgument("no scores to profile");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& s : scores) groups[s.triple.relation].push_back(s.depth_rank);
  std::vector<RelationProfile> out;
  for (const auto& [rel, ranks] : groups) {
    const double n = static_cast<double>(ranks.size());
    const double mean = std::accumulate(ranks.begin(), ranks.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : ranks) ss += (r - mean) * (r - mean);
    out.push_back({rel, mean, std::sqrt(ss / n), ranks.size()});
  }
  return out;
}

inline void check_edges(const std::vector<double>& edges) {
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw InvalidArgument("range edges must be strictly increasing");
}

/// Index of the range holding `v`: 0 is below edges[0], i is [edges[i-1], edges[i]),
/// edges.size() is the overflow range.
inline std::size_t range_index(double v, const std::vector<double>& edges) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

/// Proportion of scores per depth-rank range (edges.size() + 1 ranges).
inline std::vector<double> depth_distribution(const std::vector<DepthScore>& scores,
                                              const std::vector<double>& edges) {
  check_edges(edges);
  if (scores.empty()) throw InvalidArgument("no scores");
  std::vector<double> counts(edges.size() + 1, 0.0);
  for (const auto& s : scores) counts[range_index(s.depth_rank, edges)] += 1.0;
  for (auto& c : counts) c /= static_cast<double>(scores.size());
  return counts;
}

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_scores_csv(std::ostream& out, const std::vector<DepthScore>& scores) {
  out << "head,relation,tail,depth_rank,perplexity,backend\n";
  for (const auto& s : scores) {
    out << text::csv_field(s.triple.head) << ',' << text::csv_field(s.triple.relation) << ','
        << text::csv_field(s.triple.tail) << ',' << format_number(s.depth_rank) << ','
        << format_number(s.perplexity) << ',' << text::csv_field(s.backend_name) << '\n';
  }
}

inline std::vector<DepthScore> read_scores_csv(std::istream& in) {
  std::vector<DepthScore> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    text::strip_cr(line);
    if (lineno == 1) {
      if (line != "head,relation,tail,depth_rank,perplexity,backend")
        throw ParseError(1, "unexpected score CSV header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = text::parse_csv_line(line);
    if (f.size() != 6) throw ParseError(lineno, "expected 6 CSV fields");
    try {
      DepthScore s;
      s.triple = LabeledTriple::make(f[0], f[1], f[2]);
      s.depth_rank = std::stod(f[3]);
      s.perplexity = std::stod(f[4]);
      s.backend_name = f[5];
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

/// "head\trelation\ttail\tdepth_1_to_4" records.
inline AnnotationMap read_annotations(std::istream& in) {
  AnnotationMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    text::strip_cr(line);
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 4) throw ParseError(lineno, "expected 4 tab-separated fields");
    double d = 0.0;
    try {
      d = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad depth '" + f[3] + "'");
    }
    if (!(d >= 1.0 && d <= 4.0)) throw ParseError(lineno, "annotated depth outside [1, 4]");
    try {
      out[LabeledTriple::make(f[0], f[1], f[2]).key()] = d;
    } catch (const InvalidArgument& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace deepck
