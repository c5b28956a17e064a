#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"
#include "topiary/scoring.hpp"

using namespace topiary;
using namespace testing_support;

namespace {

// Owner 0; neighbors a=1, b=2. Two messages on topic 0.
ObservationLog two_message_log() {
  ObservationLog log(N(0));
  log.record(delivery(1, 0, 1, 0, 10.0));  // a first
  log.record(delivery(1, 0, 2, 0, 15.0));  // b +5
  log.record(delivery(2, 0, 1, 0, 23.0));  // a +3
  log.record(delivery(2, 0, 2, 0, 20.0));  // b first
  return log;
}

const InterestSet kTopic0(topics({0}));

}  // namespace

TEST(DelayScore, HandEvaluatedExample) {
  auto log = two_message_log();
  EXPECT_EQ(topic_delay_score(nodes({1}), log, kTopic0), 1.5);
  EXPECT_EQ(topic_delay_score(nodes({2}), log, kTopic0), 2.5);
  EXPECT_EQ(topic_delay_score(nodes({1, 2}), log, kTopic0), 0.0);
}

TEST(DelayScore, EmptyDeliveryGetsTheSentinel) {
  auto log = two_message_log();
  // Largest normalized delay in the log is 5, so the sentinel is 10.
  EXPECT_EQ(topic_delay_score(nodes({7}), log, kTopic0), 10.0);
  EXPECT_EQ(topic_delay_score({}, log, kTopic0), 10.0);
  ObservationLog flat(N(0));
  flat.record(delivery(1, 0, 1, 0, 4.0));
  EXPECT_EQ(topic_delay_score(nodes({5}), flat, kTopic0), 1.0);
}

TEST(DelayScore, SentinelRanksBelowEveryDeliveringSubset) {
  auto log = two_message_log();
  ScoringTable table(log, nodes({1, 2, 3}), kTopic0);
  for (SubsetMask m = 1; m <= table.full_mask(); ++m)
    if (table.delivered(m) > 0) {
      EXPECT_LT(table.delay(m), table.sentinel());
    }
}

TEST(CoverageScore, MissFractionExamples) {
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 10; ++m) log.record(delivery(m, 0, 1, 0, m));
  std::vector<std::size_t> ten{10};
  EXPECT_EQ(topic_coverage_score(nodes({1}), log, kTopic0, ten), 0.0);
  ObservationLog eight(N(0));
  for (MessageId m = 0; m < 8; ++m) eight.record(delivery(m, 0, 1, 0, m));
  EXPECT_DOUBLE_EQ(topic_coverage_score(nodes({1}), eight, kTopic0, ten), 0.2);
  EXPECT_EQ(topic_coverage_score({}, eight, kTopic0, ten), 1.0);
  EXPECT_DOUBLE_EQ(topic_coverage_score(nodes({1}), eight, kTopic0, ten, CoverageForm::delivered_fraction), 0.8);
}

TEST(CoverageScore, ClampedAndZeroExpectationRejected) {
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 4; ++m) log.record(delivery(m, 0, 1, 0, m));
  std::vector<std::size_t> two{2};
  EXPECT_EQ(topic_coverage_score(nodes({1}), log, kTopic0, two), 0.0);
  std::vector<std::size_t> zero{0};
  EXPECT_THROW(topic_coverage_score(nodes({1}), log, kTopic0, zero), ConfigError);
}

TEST(WastageScore, CountsMessagesNotDeliveries) {
  ObservationLog none(N(0));
  none.record(delivery(1, 0, 1, 0, 1.0));
  EXPECT_EQ(bandwidth_wastage_score(nodes({1}), none, kTopic0), 0.0);

  ObservationLog log(N(0));
  log.record(delivery(1, 1, 1, 0, 1.0));
  log.record(delivery(1, 1, 2, 0, 2.0));  // same message via both members
  log.record(delivery(2, 1, 2, 0, 1.0));
  log.record(delivery(3, 1, 3, 0, 1.0));  // outside the subset
  EXPECT_EQ(bandwidth_wastage_score(nodes({1, 2}), log, kTopic0), 2.0);
  EXPECT_EQ(bandwidth_wastage_score(nodes({1, 2, 3}), log, kTopic0), 3.0);
}

TEST(OverallScore, LinearCombination) {
  ObservationLog full(N(0));
  for (MessageId m = 0; m < 3; ++m) full.record(delivery(m, 0, 1, 0, m));
  ScoreWeights coverage_only;
  coverage_only.delay = 0;
  std::vector<std::size_t> three{3};
  EXPECT_EQ(overall_score(nodes({1}), full, kTopic0, three, coverage_only).total, 0.0);

  // Eight of ten delivered by a; four instantly and four 3 behind b.
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 8; ++m) {
    const double base = 10.0 * m;
    if (m < 4) {
      log.record(delivery(m, 0, 1, 0, base));
    } else {
      log.record(delivery(m, 0, 2, 0, base));
      log.record(delivery(m, 0, 1, 0, base + 3));
    }
  }
  ScoreWeights w;
  w.coverage = 1;
  w.delay = 1000;
  w.wastage = 0;
  std::vector<std::size_t> ten{10};
  auto s = overall_score(nodes({1}), log, kTopic0, ten, w);
  EXPECT_DOUBLE_EQ(s.coverage, 0.2);
  EXPECT_EQ(s.delay, 1.5);
  EXPECT_DOUBLE_EQ(s.total, 1500.2);
}

TEST(SelectBestSubset, EnumeratesAllFifteenFourSubsetsOfSix) {
  ObservationLog log(N(0));
  for (std::uint32_t u = 1; u <= 6; ++u) log.record(delivery(1, 0, u, 0, u));
  ScoreWeights w;
  auto r = select_best_subset(nodes({6, 5, 4, 3, 2, 1}), log, kTopic0, std::vector<std::size_t>{1}, w, true);
  EXPECT_EQ(r.subsets_evaluated, 15u);
  EXPECT_EQ(r.evaluated.size(), 15u);
  EXPECT_EQ(r.evaluated.front().subset, nodes({1, 2, 3, 4}));
  EXPECT_EQ(r.evaluated.back().subset, nodes({3, 4, 5, 6}));
}

TEST(SelectBestSubset, DominantNeighborAlwaysRetained) {
  // Neighbor 2 delivers every interested message first; 1 and 3 deliver none.
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 5; ++m) log.record(delivery(m, 0, 2, 0, m));
  std::vector<std::size_t> five{5};
  ScoreWeights w;
  w.keep_count = 2;
  w.switch_count = 1;
  auto r = select_best_subset(nodes({1, 2, 3}), log, kTopic0, five, w, true);
  double best = r.best.total;
  for (const auto& s : r.evaluated)
    if (s.total == best) {
      EXPECT_TRUE(std::find(s.subset.begin(), s.subset.end(), N(2)) != s.subset.end());
    }
  EXPECT_EQ(r.best.subset, nodes({1, 2}));
}

TEST(SelectBestSubset, IdenticalNeighborsGiveLexicographicallySmallest) {
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 4; ++m)
    for (std::uint32_t u : {9u, 4u, 7u, 5u, 8u, 6u}) log.record(delivery(m, 0, u, 0, m));
  ScoreWeights w;
  auto r = select_best_subset(nodes({9, 4, 7, 5, 8, 6}), log, kTopic0, std::vector<std::size_t>{4}, w);
  EXPECT_EQ(r.best.subset, nodes({4, 5, 6, 7}));
}

TEST(ScoreWeights, Violations) {
  ScoreWeights w;
  EXPECT_TRUE(w.violations(6).empty());
  w.eta = 1.0;
  auto v = w.violations(6);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "eta must exceed 1");
  ScoreWeights zero;
  zero.coverage = zero.delay = zero.wastage = 0;
  EXPECT_FALSE(zero.violations(6).empty());
  EXPECT_FALSE(ScoreWeights{}.violations(5).empty());  // 4 + 2 != 5
}

// Random logs for the properties below.
namespace {

struct RandomCase {
  ObservationLog log;
  std::vector<NodeId> neighbors;
  InterestSet interests;
  std::vector<std::size_t> expected;
};

RandomCase random_case(std::mt19937_64& rng) {
  RandomCase c{ObservationLog(N(0)), nodes({1, 2, 3, 4, 5, 6}), InterestSet(topics({0, 2})), {0, 0, 0}};
  std::uniform_real_distribution<double> jitter(0, 4);
  std::bernoulli_distribution sends(0.5);
  for (MessageId m = 0; m < 40; ++m) {
    std::uint32_t topic = m % 3;
    c.expected[topic] += 1;
    for (std::uint32_t u = 1; u <= 6; ++u)
      if (sends(rng)) c.log.record(delivery(m, topic, u, 0, 10.0 * m + jitter(rng)));
  }
  return c;
}

}  // namespace

TEST(ScoringProperties, CoverageShrinksAndWastageSubadditive) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = random_case(rng);
    ScoringTable t(c.log, c.neighbors, c.interests);
    const std::size_t e = expected_total(c.interests, c.expected);
    for (SubsetMask a = 0; a <= t.full_mask(); ++a) {
      for (SubsetMask b = a;; b = (b + 1) | a) {  // supersets of a
        double ca = coverage_from_counts(t.delivered(a), e, CoverageForm::miss_fraction);
        double cb = coverage_from_counts(t.delivered(b), e, CoverageForm::miss_fraction);
        EXPECT_GE(ca, cb);
        if (a != 0 && t.delivered(a) == t.delivered(b)) {
          EXPECT_LE(t.delay(b), t.delay(a));
        }
        if (b == t.full_mask()) break;
      }
      for (SubsetMask b = 0; b <= t.full_mask(); b += 7)
        EXPECT_LE(t.wasted(a | b), t.wasted(a) + t.wasted(b));
    }
  }
}

TEST(ScoringProperties, ArgminInvariantUnderWeightScaling) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_case(rng);
    ScoreWeights w;
    w.coverage = u(rng);
    w.delay = 1000 * u(rng);
    w.wastage = u(rng);
    auto base = select_best_subset(c.neighbors, c.log, c.interests, c.expected, w);
    for (double lambda : {0.125, 0.5, 4.0, 1024.0}) {
      ScoreWeights s = w;
      s.coverage *= lambda;
      s.delay *= lambda;
      s.wastage *= lambda;
      auto scaled = select_best_subset(c.neighbors, c.log, c.interests, c.expected, s);
      EXPECT_EQ(scaled.best.subset, base.best.subset) << "lambda " << lambda;
    }
  }
}

TEST(ScoringTable, RejectsUnknownSubsetMember) {
  auto log = two_message_log();
  ScoringTable t(log, nodes({1, 2}), kTopic0);
  EXPECT_THROW(t.mask_of(nodes({3})), std::invalid_argument);
  EXPECT_EQ(t.mask_of(nodes({2})), 2u);
}
