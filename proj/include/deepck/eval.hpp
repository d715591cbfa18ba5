#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "deepck/depth_metrics.hpp"
#include "deepck/error.hpp"

namespace deepck {

/// Binary precision/recall/F1 with class 1 as positive. Undefined ratios read 0 and
/// raise the matching flag.
struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool empty = false;

  std::size_t total() const { return tp + fp + tn + fn; }
};

inline EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  const auto n = r.total();
  if (n == 0) {
    r.empty = r.precision_undefined = r.recall_undefined = r.f1_undefined = true;
    return r;
  }
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
  if (tp + fp > 0)
    r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    r.precision_undefined = true;
  if (tp + fn > 0)
    r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else
    r.recall_undefined = true;
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.f1_undefined = true;
  return r;
}

inline EvalReport evaluate(const std::vector<int>& predictions, const std::vector<int>& gold) {
  if (predictions.size() != gold.size()) throw InvalidArgument("evaluate: prediction and gold lengths differ");
  if (predictions.empty()) throw InvalidArgument("evaluate: no examples");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == 1, g = gold[i] == 1;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
    else ++tn;
  }
  return report_from_counts(tp, fp, tn, fn);
}

struct RangeReport {
  double low = -std::numeric_limits<double>::infinity();  // [low, high)
  double high = std::numeric_limits<double>::infinity();
  EvalReport report;
};

/// Splits examples by depth-rank range (see range_index) and evaluates each range.
inline std::vector<RangeReport> performance_by_depth(const std::vector<int>& predictions, const std::vector<int>& gold,
                                                     const std::vector<double>& depth_ranks,
                                                     const std::vector<double>& edges) {
  if (predictions.size() != gold.size() || gold.size() != depth_ranks.size())
    throw InvalidArgument("performance_by_depth: inputs are not aligned");
  if (gold.empty()) throw InvalidArgument("performance_by_depth: no examples");
  check_edges(edges);
  std::vector<std::vector<int>> p(edges.size() + 1), g(edges.size() + 1);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto r = range_index(depth_ranks[i], edges);
    p[r].push_back(predictions[i]);
    g[r].push_back(gold[i]);
  }
  std::vector<RangeReport> out(edges.size() + 1);
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (r > 0) out[r].low = edges[r - 1];
    if (r < edges.size()) out[r].high = edges[r];
    out[r].report = g[r].empty() ? report_from_counts(0, 0, 0, 0) : evaluate(p[r], g[r]);
  }
  return out;
}

}  // namespace deepck
