#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <map>
#include <set>

#include "test_support.hpp"
#include "topiary/explore.hpp"

using namespace topiary;
using namespace testing_support;

namespace {

double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Topic 0: five messages, retained neighbor 1 first every time.
// Topic 1: ten published; 1 delivers five of them, each 2 behind neighbor 9.
ObservationLog two_topic_log() {
  ObservationLog log(N(0));
  for (MessageId m = 0; m < 5; ++m) log.record(delivery(m, 0, 1, 0, 100.0 * m));
  for (MessageId m = 10; m < 15; ++m) {
    log.record(delivery(m, 1, 9, 0, 100.0 * m));
    log.record(delivery(m, 1, 1, 0, 100.0 * m + 2));
  }
  return log;
}

}  // namespace

TEST(PerTopicScores, HandEvaluatedTopics) {
  auto log = two_topic_log();
  ScoreWeights w;
  w.coverage = 1;
  w.delay = 10;
  std::vector<std::size_t> published{5, 10};
  auto s = per_topic_scores(nodes({1}), log, InterestSet(topics({0, 1})), published, w);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].topic, T(0));
  EXPECT_EQ(s[0].total, 0.0);
  EXPECT_EQ(s[1].coverage, 0.5);
  EXPECT_EQ(s[1].delay, 2.0);
  EXPECT_EQ(s[1].total, 20.5);
}

TEST(PerTopicScores, SingleTopicAndZeroExpectation) {
  auto log = two_topic_log();
  ScoreWeights w;
  std::vector<std::size_t> published{5, 10};
  EXPECT_EQ(per_topic_scores(nodes({1}), log, InterestSet(topics({1})), published, w).size(), 1u);
  std::vector<std::size_t> none{5, 0};
  EXPECT_THROW(per_topic_scores(nodes({1}), log, InterestSet(topics({0, 1})), none, w), ConfigError);
}

TEST(Underperforming, Examples) {
  std::vector<PerTopicScore> a{{T(1), 0, 0, 0.0}, {T(2), 0, 0, 20.5}};
  EXPECT_EQ(underperforming_topics(a, 2.0), topics({2}));
  std::vector<PerTopicScore> flat{{T(0), 0, 0, 3.0}, {T(1), 0, 0, 3.0}};
  EXPECT_TRUE(underperforming_topics(flat, 2.0).empty());
  std::vector<PerTopicScore> b{{T(1), 0, 0, 10}, {T(2), 0, 0, 15}, {T(3), 0, 0, 25}};
  EXPECT_EQ(underperforming_topics(b, 2.0), topics({3}));
  // At exactly eta times the minimum the topic is not underperforming.
  std::vector<PerTopicScore> edge{{T(0), 0, 0, 10}, {T(1), 0, 0, 20}};
  EXPECT_TRUE(underperforming_topics(edge, 2.0).empty());
}

TEST(Underperforming, NeverContainsTheArgmin) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PerTopicScore> s;
    for (std::uint32_t t = 0; t < 6; ++t) s.push_back({T(t), 0, 0, trial % 3 == 0 ? std::floor(u(rng) / 30) : u(rng)});
    auto best = std::min_element(s.begin(), s.end(), [](auto& x, auto& y) { return x.total < y.total; });
    auto plus = underperforming_topics(s, 1.5);
    EXPECT_EQ(std::count(plus.begin(), plus.end(), best->topic), 0);
  }
}

TEST(CandidateWeights, IntersectionSizes) {
  // 0 = v; 1 subscribes {0}; 2 subscribes {0,1,2}; 3 subscribes {2}.
  auto subs = SubscriptionTable::from_lists(3, {{T(0)}, {T(0)}, {T(0), T(1), T(2)}, {T(2)}});
  auto w = candidate_weights(topics({0, 1}), subs, nodes({0}));
  std::vector<CandidateWeight> expect{{N(1), 1}, {N(2), 2}, {N(3), 0}};
  EXPECT_EQ(w, expect);
  for (const auto& c : candidate_weights({}, subs, nodes({0}))) EXPECT_EQ(c.weight, 0u);
  auto excl = candidate_weights(topics({0}), subs, nodes({0, 2}));
  ASSERT_EQ(excl.size(), 2u);
  EXPECT_EQ(excl[0].node, N(1));
  EXPECT_EQ(excl[1].node, N(3));
}

TEST(SampleReplacements, ProportionalFirstDraw) {
  std::vector<CandidateWeight> w{{N(10), 1}, {N(20), 2}};
  std::vector<double> counts(2, 0);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng = derive_rng(4242, stream::kExplore, i, 0);
    counts[sample_replacements(w, 1, rng)[0] == N(10) ? 0 : 1] += 1;
  }
  EXPECT_GT(chi_square_p(counts, {10000.0 / 3, 20000.0 / 3}), 0.01);
}

TEST(SampleReplacements, AllZeroFallsBackToUniform) {
  std::vector<CandidateWeight> w{{N(1), 0}, {N(2), 0}};
  std::vector<double> counts(2, 0);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng = derive_rng(99, stream::kExplore, i, 1);
    counts[sample_replacements(w, 1, rng)[0] == N(1) ? 0 : 1] += 1;
  }
  EXPECT_GT(chi_square_p(counts, {5000, 5000}), 0.01);
}

TEST(SampleReplacements, ZeroWeightNeverDrawnWhilePositiveRemain) {
  std::vector<CandidateWeight> w{{N(1), 0}, {N(2), 3}, {N(3), 1}, {N(4), 0}};
  const std::set<NodeId> positive{N(2), N(3)};
  for (std::uint64_t i = 0; i < 2000; ++i) {
    Rng rng(i);
    auto pick = sample_replacements(w, 2, rng);
    EXPECT_EQ(std::set<NodeId>(pick.begin(), pick.end()), positive);
  }
}

TEST(SampleReplacements, WholePoolAndErrors) {
  std::vector<CandidateWeight> w{{N(1), 0}, {N(2), 5}, {N(3), 1}};
  Rng rng(3);
  auto all = sample_replacements(w, 3, rng);
  EXPECT_EQ(std::set<NodeId>(all.begin(), all.end()).size(), 3u);
  EXPECT_THROW(sample_replacements(w, 4, rng), SamplingError);
  Rng a(17), b(17);
  EXPECT_EQ(sample_replacements(w, 2, a), sample_replacements(w, 2, b));
}

TEST(PlanExploration, NeverProposesSelfRetainedOrDuplicates) {
  Rng sub_rng(12);
  auto subs = build_subscriptions(40, 5, 0.3, sub_rng);
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    NodeId self = N(trial % 40);
    auto own = subs.topics_of(self);
    InterestSet interests(own);
    std::vector<NodeId> out;
    for (std::uint32_t k = 1; out.size() < 6; ++k) out.push_back(N((self.value + 3 * k) % 40));
    std::sort(out.begin(), out.end());
    ObservationLog log(self);
    std::vector<std::size_t> published(5, 0);
    std::uniform_real_distribution<double> jitter(0, 5);
    for (MessageId m = 0; m < 30; ++m) {
      std::uint32_t t = static_cast<std::uint32_t>(m % 5);
      published[t] += 1;
      for (NodeId u : out)
        if (gen() % 2) log.record(DeliveryEvent{m, T(t), u, self, 10.0 * m + jitter(gen), 1});
    }
    ScoreWeights w;
    auto sel = select_best_subset(out, log, interests, published, w);
    ScoringTable table(log, out, interests);
    Rng rng = derive_rng(1, stream::kExplore, self.value, trial);
    auto plan = plan_exploration(self, table, sel.best_mask, interests, published, subs, w, 2, rng);
    ASSERT_EQ(plan.sampled.size(), 2u);
    EXPECT_NE(plan.sampled[0], plan.sampled[1]);
    for (NodeId u : plan.sampled) {
      EXPECT_NE(u, self);
      EXPECT_EQ(std::count(sel.best.subset.begin(), sel.best.subset.end(), u), 0);
    }
    for (const auto& cw : plan.weights) {
      std::size_t expect = 0;
      for (TopicId t : plan.underperforming) expect += subs.subscribes(cw.node, t);
      EXPECT_EQ(cw.weight, expect);
    }
  }
}
