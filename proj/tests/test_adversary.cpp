#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "topiary/adversary.hpp"
#include "topiary/simulation.hpp"

using namespace topiary;
using namespace testing_support;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.network.nodes = 60;
  c.num_topics = 6;
  c.interest_rate = 0.4;
  c.messages_per_epoch = 60;
  c.num_epochs = 4;
  return c;
}

}  // namespace

TEST(AttackNames, RoundTrip) {
  for (auto k : {AttackKind::none, AttackKind::topic_withhold, AttackKind::eclipse})
    EXPECT_EQ(parse_attack(attack_name(k)), k);
  EXPECT_FALSE(parse_attack("sybil"));
}

TEST(ChooseAttackers, DistinctAndBounded) {
  Rng rng(1);
  auto a = choose_attackers(100, 30, rng);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(a.honest().size(), 70u);
  EXPECT_THROW(choose_attackers(10, 10, rng), ConfigError);
}

TEST(TopicWithhold, VictimTopicRelaySetIsEmpty) {
  auto subs = SubscriptionTable::from_lists(2, {{T(0), T(1)}, {T(0)}, {T(1)}, {T(0), T(1)}, {T(0)}, {T(1)}});
  AttackerSet attackers(6, nodes({0}));
  auto o = apply_topic_withhold(6, attackers, T(0));
  auto five = nodes({1, 2, 3, 4, 5});
  EXPECT_TRUE(relay_decision(N(0), T(0), 1, N(1), subs, five, &o).empty());
  EXPECT_EQ(relay_decision(N(0), T(1), 1, N(1), subs, five, &o), nodes({2, 3, 4, 5}));
  // Honest nodes are untouched.
  EXPECT_EQ(relay_decision(N(3), T(0), 1, N(1), subs, nodes({0, 2}), &o), nodes({0, 2}));
}

TEST(TopicWithhold, AttackersStillReceiveAndLog) {
  auto subs = SubscriptionTable::from_lists(1, {{T(0)}, {T(0)}, {T(0)}});
  auto lat = links_model(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  AttackerSet attackers(3, nodes({1}));
  auto o = apply_topic_withhold(3, attackers, T(0));
  std::vector<Message> sched{{0, T(0), N(0), 0.0, 1}};
  auto trace = run_epoch(undirected(3, {{0, 1}, {1, 2}}), subs, lat, sched, &o);
  ASSERT_EQ(trace.messages[0].receipts.size(), 2u);
  EXPECT_EQ(trace.messages[0].receipts[1].receiver, N(1));
  EXPECT_EQ(trace.logs[1].size(), 1u);
  EXPECT_EQ(trace.logs[2].size(), 0u);
}

TEST(Eclipse, CliqueIsPinnedOutsideTheBudget) {
  Rng rng(5);
  auto g = random_overlay(200, 6, rng);
  auto attackers = choose_attackers(200, 60, rng);
  apply_eclipse(g, attackers, rng);
  std::size_t pinned = 0;
  for (NodeId a : attackers.members()) {
    pinned += g.pinned(a).size();
    ASSERT_EQ(g.outgoing(a).size(), 6u);
    for (NodeId u : g.outgoing(a)) EXPECT_FALSE(attackers.contains(u));
  }
  EXPECT_EQ(pinned, 60u * 59u);
  for (NodeId v : attackers.honest()) {
    EXPECT_EQ(g.outgoing(v).size(), 6u);
    EXPECT_TRUE(g.pinned(v).empty());
  }
}

TEST(Eclipse, InitialAttackerShareMatchesUniformSelection) {
  Rng rng(9);
  auto g = random_overlay(1000, 6, rng);
  auto attackers = choose_attackers(1000, 300, rng);
  const auto honest = attackers.honest();
  const double p = 300.0 / 999.0;
  const double sd = std::sqrt(p * (1 - p) / (700.0 * 6.0));
  EXPECT_NEAR(attacker_outgoing_fraction(g, attackers, honest), p, 5 * sd);
}

TEST(Eclipse, HonestForwardingLosesNoCoverage) {
  auto clean = small_config();
  auto attacked = clean;
  attacked.attack = AttackConfig{AttackKind::eclipse, 15, TopicId(0), false};
  Simulation a(clean, 3), b(attacked, 3);
  auto ra = a.step().report;
  auto rb = b.step().report;
  EXPECT_EQ(ra.receive_rate, 1.0);
  EXPECT_EQ(rb.receive_rate, 1.0);
}

TEST(Eclipse, AttackersKeepStaticLinksUnderTopiary) {
  auto cfg = small_config();
  cfg.attack = AttackConfig{AttackKind::eclipse, 15, TopicId(0), false};
  Simulation sim(cfg, 4);
  auto before = sim.overlay();
  for (int e = 0; e < 3; ++e) sim.step();
  for (NodeId a : sim.attackers().members()) {
    auto x = before.outgoing(a), y = sim.overlay().outgoing(a);
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  for (NodeId v : sim.attackers().honest()) EXPECT_EQ(sim.overlay().outgoing(v).size(), 6u);
}

TEST(NullAttack, ZeroAttackersReproduceTheAttackFreeRun) {
  auto clean = small_config();
  for (auto kind : {AttackKind::topic_withhold, AttackKind::eclipse}) {
    auto zero = clean;
    zero.attack = AttackConfig{kind, 0, TopicId(0), false};
    Simulation a(clean, 11), b(zero, 11);
    for (int e = 0; e < 4; ++e) {
      auto oa = a.step();
      auto ob = b.step();
      EXPECT_EQ(oa.report.receive_rate, ob.report.receive_rate);
      EXPECT_EQ(oa.report.avg_delay, ob.report.avg_delay);
      EXPECT_EQ(oa.report.avg_neighbor_score, ob.report.avg_neighbor_score);
      EXPECT_EQ(oa.report.score_distribution, ob.report.score_distribution);
    }
    for (std::uint32_t v = 0; v < 60; ++v) {
      auto x = a.overlay().outgoing(N(v)), y = b.overlay().outgoing(N(v));
      EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
  }
}

TEST(EvictionCurve, Extremes) {
  Rng rng(2);
  std::vector<OverlayGraph> overlays{random_overlay(20, 3, rng), random_overlay(20, 3, rng)};
  AttackerSet none(20, {});
  EXPECT_EQ(eviction_curve(overlays, none), (std::vector<double>{0.0, 0.0}));
  std::vector<NodeId> all_but_one;
  for (std::uint32_t v = 1; v < 20; ++v) all_but_one.push_back(N(v));
  AttackerSet most(20, all_but_one);
  EXPECT_EQ(eviction_curve(overlays, most), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(max_attacker_share(overlays[0], most, nodes({0})), 1.0);
}

TEST(EvictionCurve, ObserversRestrictTheDenominator) {
  OverlayGraph g(4, 2);
  g.set_outgoing(N(0), nodes({1, 2}));
  g.set_outgoing(N(3), nodes({0, 2}));
  AttackerSet a(4, nodes({1}));
  std::vector<OverlayGraph> one{g};
  EXPECT_EQ(eviction_curve(one, a, nodes({0}))[0], 0.5);
  EXPECT_EQ(eviction_curve(one, a, nodes({3}))[0], 0.0);
  EXPECT_EQ(eviction_curve(one, a)[0], 0.25);
}
