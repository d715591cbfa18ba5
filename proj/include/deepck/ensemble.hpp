#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepck/error.hpp"

namespace deepck {

/// (p_0, p_1): probability of fictitious and of valid.
using ProbPair = std::array<double, 2>;

enum class Strategy { avg, max, vote };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::avg: return "avg";
    case Strategy::max: return "max";
    case Strategy::vote: return "vote";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "avg") return Strategy::avg;
  if (s == "max") return Strategy::max;
  if (s == "vote") return Strategy::vote;
  throw InvalidArgument("unknown strategy '" + std::string(s) + "' (expected avg, max or vote)");
}

inline constexpr Strategy kAllStrategies[] = {Strategy::avg, Strategy::max, Strategy::vote};

/// Rejects empty bundles and pairs that are not distributions (tolerance 1e-6).
inline void validate_pairs(std::span<const ProbPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("need at least one prediction (K >= 1)");
  for (const auto& p : pairs) {
    if (!(p[0] >= 0.0 && p[1] >= 0.0) || std::abs(p[0] + p[1] - 1.0) > 1e-6)
      throw InvalidArgument("prediction is not a normalized binary distribution");
  }
}

/// Ties go to label 1.
inline int argmax2(double p0, double p1) { return p0 > p1 ? 0 : 1; }

inline int predict_avg(std::span<const ProbPair> pairs) {
  validate_pairs(pairs);
  double s0 = 0.0, s1 = 0.0;
  for (const auto& p : pairs) {
    s0 += p[0];
    s1 += p[1];
  }
  return argmax2(s0, s1);
}

inline int predict_max(std::span<const ProbPair> pairs) {
  validate_pairs(pairs);
  double m0 = 0.0, m1 = 0.0;
  for (const auto& p : pairs) {
    m0 = std::max(m0, p[0]);
    m1 = std::max(m1, p[1]);
  }
  return argmax2(m0, m1);
}

inline int predict_vote(std::span<const ProbPair> pairs) {
  validate_pairs(pairs);
  std::size_t n0 = 0, n1 = 0;
  for (const auto& p : pairs) (argmax2(p[0], p[1]) == 0 ? n0 : n1)++;
  return n0 > n1 ? 0 : 1;
}

struct PredictionBundle {
  std::vector<ProbPair> per_pair;
  int label = 1;
  Strategy strategy = Strategy::avg;
  /// The pair the decision was taken on: means (avg), maxima (max), vote shares (vote).
  ProbPair score{0.5, 0.5};
};

inline PredictionBundle ensemble(std::vector<ProbPair> per_pair, Strategy strategy) {
  validate_pairs(per_pair);
  PredictionBundle b;
  b.strategy = strategy;
  const double k = static_cast<double>(per_pair.size());
  switch (strategy) {
    case Strategy::avg:
      b.label = predict_avg(per_pair);
      b.score = {0.0, 0.0};
      for (const auto& p : per_pair) {
        b.score[0] += p[0] / k;
        b.score[1] += p[1] / k;
      }
      break;
    case Strategy::max:
      b.label = predict_max(per_pair);
      b.score = {0.0, 0.0};
      for (const auto& p : per_pair) {
        b.score[0] = std::max(b.score[0], p[0]);
        b.score[1] = std::max(b.score[1], p[1]);
      }
      break;
    case Strategy::vote: {
      b.label = predict_vote(per_pair);
      double n1 = 0.0;
      for (const auto& p : per_pair) n1 += argmax2(p[0], p[1]);
      b.score = {1.0 - n1 / k, n1 / k};
      break;
    }
  }
  b.per_pair = std::move(per_pair);
  return b;
}

struct LossValue {
  double value = 0.0;
  bool clamped = false;  // some gold probability fell below the 1e-12 floor
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean negative log-likelihood of the gold label over the per-pair predictions.
inline LossValue pair_loss(std::span<const ProbPair> pairs, int gold) {
  validate_pairs(pairs);
  if (gold != 0 && gold != 1) throw InvalidArgument("gold label must be 0 or 1");
  LossValue out;
  for (const auto& p : pairs) {
    double q = p[static_cast<std::size_t>(gold)];
    if (!(q > kProbabilityFloor)) {
      q = kProbabilityFloor;
      out.clamped = true;
    }
    out.value -= std::log(q);
  }
  out.value /= static_cast<double>(pairs.size());
  return out;
}

}  // namespace deepck
