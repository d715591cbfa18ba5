#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "deepck/ensemble.hpp"
#include "deepck/eval.hpp"

using namespace deepck;

TEST(Avg, Examples) {
  const std::vector<ProbPair> p{{0.9, 0.1}, {0.2, 0.8}, {0.2, 0.8}};
  EXPECT_EQ(predict_avg(p), 1);
  const auto b = ensemble(p, Strategy::avg);
  EXPECT_NEAR(b.score[0], 1.3 / 3, 1e-15);
  EXPECT_NEAR(b.score[1], 1.7 / 3, 1e-15);
  EXPECT_EQ(predict_avg(std::vector<ProbPair>{{1, 0}, {1, 0}}), 0);
  EXPECT_EQ(predict_avg(std::vector<ProbPair>{{0.7, 0.3}}), 0);
}

TEST(Max, Examples) {
  const std::vector<ProbPair> p{{0.6, 0.4}, {0.05, 0.95}};
  EXPECT_EQ(predict_max(p), 1);
  EXPECT_EQ(ensemble(p, Strategy::max).score, (ProbPair{0.6, 0.95}));
  EXPECT_EQ(predict_max(std::vector<ProbPair>{{1, 0}, {1, 0}, {1, 0}}), 0);
  EXPECT_EQ(predict_max(std::vector<ProbPair>{{0.3, 0.7}}), 1);
}

TEST(Vote, Examples) {
  EXPECT_EQ(predict_vote(std::vector<ProbPair>{{0.9, 0.1}, {0.4, 0.6}, {0.45, 0.55}}), 1);
  EXPECT_EQ(predict_vote(std::vector<ProbPair>{{1, 0}, {1, 0}}), 0);
  EXPECT_EQ(predict_vote(std::vector<ProbPair>{{0.8, 0.2}}), 0);
}

TEST(Ensemble, TiesGoToValid) {
  const std::vector<ProbPair> tie{{0.5, 0.5}};
  for (auto s : kAllStrategies) EXPECT_EQ(ensemble(tie, s).label, 1);
  EXPECT_EQ(predict_vote(std::vector<ProbPair>{{0.9, 0.1}, {0.1, 0.9}}), 1);
  EXPECT_EQ(predict_avg(std::vector<ProbPair>{{0.75, 0.25}, {0.25, 0.75}}), 1);
}

TEST(Ensemble, RejectsBadInput) {
  EXPECT_THROW(predict_avg(std::vector<ProbPair>{}), InvalidArgument);
  EXPECT_THROW(predict_max(std::vector<ProbPair>{{0.5, 0.6}}), InvalidArgument);
  EXPECT_THROW(predict_vote(std::vector<ProbPair>{{-0.1, 1.1}}), InvalidArgument);
  EXPECT_THROW(parse_strategy("median"), InvalidArgument);
  EXPECT_EQ(parse_strategy("vote"), Strategy::vote);
}

TEST(Ensemble, RandomBundleProperties) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kd(1, 7);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ProbPair> p(static_cast<std::size_t>(kd(gen)));
    for (auto& x : p) {
      x[1] = u(gen);
      x[0] = 1.0 - x[1];
    }
    auto shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    for (auto s : kAllStrategies) {
      EXPECT_EQ(ensemble(p, s).label, ensemble(shuffled, s).label);
      if (p.size() == 1) EXPECT_EQ(ensemble(p, s).label, argmax2(p[0][0], p[0][1]));
    }
  }
}

TEST(Loss, Examples) {
  EXPECT_EQ(pair_loss(std::vector<ProbPair>{{0, 1}}, 1).value, 0.0);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(pair_loss(std::vector<ProbPair>{{1 - e, e}, {1 - e, e}}, 1).value, 1.0, 1e-12);
  EXPECT_NEAR(pair_loss(std::vector<ProbPair>{{0.5, 0.5}, {0.8, 0.2}, {0.9, 0.1}}, 0).value,
              -(std::log(0.5) + std::log(0.8) + std::log(0.9)) / 3, 1e-12);
  EXPECT_NEAR(pair_loss(std::vector<ProbPair>{{0.5, 0.5}, {0.8, 0.2}, {0.9, 0.1}}, 0).value, 0.3406, 1e-4);
}

TEST(Loss, ClampsZeroProbability) {
  const auto l = pair_loss(std::vector<ProbPair>{{1, 0}}, 1);
  EXPECT_TRUE(l.clamped);
  EXPECT_NEAR(l.value, -std::log(1e-12), 1e-9);
  EXPECT_FALSE(pair_loss(std::vector<ProbPair>{{0.5, 0.5}}, 1).clamped);
  EXPECT_THROW(pair_loss(std::vector<ProbPair>{{0.5, 0.5}}, 2), InvalidArgument);
}

TEST(Evaluate, AllCorrect) {
  const auto r = evaluate({1, 0, 1, 1}, {1, 0, 1, 1});
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Evaluate, HandExample) {
  // TP=3, FP=1, FN=2, TN=1
  const auto r = evaluate({1, 1, 1, 1, 0, 0, 0}, {1, 1, 1, 0, 1, 1, 0});
  EXPECT_EQ(r.tp, 3u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 2u);
  EXPECT_EQ(r.tn, 1u);
  EXPECT_EQ(r.precision, 0.75);
  EXPECT_EQ(r.recall, 0.6);
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
}

TEST(Evaluate, Degenerate) {
  const auto r = evaluate({0, 0}, {0, 0});
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_TRUE(r.recall_undefined);
  EXPECT_TRUE(r.f1_undefined);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_THROW(evaluate({0, 1}, {0}), InvalidArgument);
}

TEST(Evaluate, F1IdentityOnRandomMatrices) {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<std::size_t> c(0, 50);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = report_from_counts(c(gen), c(gen), c(gen), c(gen));
    if (r.empty) continue;
    const double expect = 2.0 * r.tp / static_cast<double>(2 * r.tp + r.fp + r.fn);
    if (r.tp > 0) {
      EXPECT_NEAR(r.f1, expect, 1e-12);
    } else {
      EXPECT_EQ(r.f1, 0.0);
    }
  }
}

TEST(PerfByDepth, SingleRangeIsGlobal) {
  const std::vector<int> p{1, 0, 1, 1, 0}, g{1, 1, 0, 1, 0};
  const auto r = performance_by_depth(p, g, {5, 50, 500, 5000, 1}, {});
  ASSERT_EQ(r.size(), 1u);
  const auto all = evaluate(p, g);
  EXPECT_EQ(r[0].report.f1, all.f1);
  EXPECT_EQ(r[0].report.accuracy, all.accuracy);
}

TEST(PerfByDepth, TwoRanges) {
  // ranks < 100: preds {1,1,0} gold {1,0,0}; ranks >= 100: preds {0,1,1} gold {1,1,1}
  const std::vector<int> p{1, 0, 1, 1, 0, 1}, g{1, 1, 0, 1, 0, 1};
  const std::vector<double> ranks{5, 500, 50, 150, 20, 3000};
  const auto r = performance_by_depth(p, g, ranks, {100});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].report.precision, 0.5);
  EXPECT_EQ(r[0].report.recall, 1.0);
  EXPECT_NEAR(r[0].report.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r[1].report.precision, 1.0);
  EXPECT_NEAR(r[1].report.recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r[1].report.f1, 0.8, 1e-15);
  EXPECT_EQ(r[1].low, 100.0);
}

TEST(PerfByDepth, EmptyRangeFlagged) {
  const auto r = performance_by_depth({1, 0}, {1, 0}, {10, 20}, {100, 200});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_FALSE(r[0].report.empty);
  EXPECT_TRUE(r[1].report.empty);
  EXPECT_TRUE(r[2].report.empty);
}
