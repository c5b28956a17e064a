#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topiary/explore.hpp"
#include "topiary/gossip.hpp"
#include "topiary/net_model.hpp"
#include "topiary/scoring.hpp"

namespace topiary {

enum class PolicyKind {
  topiary,
  random_static,
  complete_static,
  gossipsub_like,
  scribe_random_groups,
  scribe_topic_groups,
};

inline constexpr std::string_view policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::topiary: return "topiary";
    case PolicyKind::random_static: return "random-static";
    case PolicyKind::complete_static: return "complete-static";
    case PolicyKind::gossipsub_like: return "gossipsub-like";
    case PolicyKind::scribe_random_groups: return "scribe-random-groups";
    case PolicyKind::scribe_topic_groups: return "scribe-topic-groups";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (auto k : {PolicyKind::topiary, PolicyKind::random_static, PolicyKind::complete_static,
                 PolicyKind::gossipsub_like, PolicyKind::scribe_random_groups,
                 PolicyKind::scribe_topic_groups})
    if (policy_name(k) == name) return k;
  return std::nullopt;
}

struct ProtocolPolicy {
  PolicyKind kind = PolicyKind::topiary;
  std::size_t scribe_groups = 40;  // random grouping only

  bool is_static() const { return kind != PolicyKind::topiary; }
};

// ---------------------------------------------------------------------------
// Topiary
// ---------------------------------------------------------------------------

/// Messages a node could have received on each topic: everything published
/// minus what it published itself.
inline std::vector<std::size_t> expected_counts(NodeId node, const EpochTrace& trace) {
  std::vector<std::size_t> counts = trace.published_counts;
  for (const auto& mt : trace.messages)
    if (mt.message.publisher == node) counts[mt.message.topic.value] -= 1;
  return counts;
}

struct TopiaryUpdate {
  std::vector<NodeId> outgoing;  // retained (sorted) followed by explored picks
  SelectionResult selection;
  ExplorationPlan exploration;
  std::vector<NodeId> replaced;  // previous outgoing neighbors dropped
  bool skipped = false;          // nothing expected on any subscribed topic
};

/// One node's end-of-epoch rewiring: keep the lowest-cost subset of its
/// outgoing neighbors and refill the freed slots by weighted exploration.
inline TopiaryUpdate topiary_epoch_update(NodeId node, std::span<const NodeId> outgoing,
                                          std::size_t degree_bound, const ObservationLog& log,
                                          const SubscriptionTable& subs,
                                          std::span<const std::size_t> expected,
                                          const ScoreWeights& w, Rng& rng,
                                          bool keep_all_scores = false) {
  TopiaryUpdate up;
  const InterestSet interests(subs.topics_of(node));
  if (expected_total(interests, expected) == 0) {
    up.outgoing.assign(outgoing.begin(), outgoing.end());
    up.skipped = true;
    return up;
  }

  up.selection = select_best_subset(outgoing, log, interests, expected, w, keep_all_scores);
  const auto& retained = up.selection.best.subset;

  // Per-topic scoring only covers topics with something to expect.
  std::vector<TopicId> scorable;
  for (TopicId t : interests.topics())
    if (expected[t.value] > 0) scorable.push_back(t);
  const InterestSet scored_topics(scorable);

  std::vector<NodeId> sorted(outgoing.begin(), outgoing.end());
  std::sort(sorted.begin(), sorted.end());
  ScoringTable table(log, sorted, interests);
  const std::size_t free_slots = degree_bound > retained.size() ? degree_bound - retained.size() : 0;
  up.exploration = plan_exploration(node, table, up.selection.best_mask, scored_topics, expected,
                                    subs, w, free_slots, rng);

  up.outgoing = retained;
  up.outgoing.insert(up.outgoing.end(), up.exploration.sampled.begin(),
                     up.exploration.sampled.end());
  for (NodeId u : outgoing)
    if (std::find(up.outgoing.begin(), up.outgoing.end(), u) == up.outgoing.end())
      up.replaced.push_back(u);
  return up;
}

// ---------------------------------------------------------------------------
// Static baselines
// ---------------------------------------------------------------------------

struct GossipsubSlot {
  TopicId topic;
  NodeId peer;
};

/// Splits a node's d outgoing slots round-robin over its topics (in random
/// order). A slot whose topic has no eligible subscriber left moves on to the
/// next topic; slots stay empty only when no topic has one.
inline std::vector<GossipsubSlot> gossipsub_node_slots(NodeId v, const SubscriptionTable& subs,
                                                       std::size_t d, Rng& rng) {
  auto own = subs.topics_of(v);
  std::vector<TopicId> order(own.begin(), own.end());
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<GossipsubSlot> slots;
  std::vector<NodeId> chosen;
  std::vector<NodeId> eligible;
  for (std::size_t slot = 0; slot < d; ++slot) {
    bool filled = false;
    for (std::size_t k = 0; k < order.size() && !filled; ++k) {
      TopicId t = order[(slot + k) % order.size()];
      eligible.clear();
      for (NodeId u : subs.subscribers_of(t))
        if (u != v && std::find(chosen.begin(), chosen.end(), u) == chosen.end())
          eligible.push_back(u);
      if (eligible.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
      NodeId peer = eligible[pick(rng)];
      chosen.push_back(peer);
      slots.push_back(GossipsubSlot{t, peer});
      filled = true;
    }
    if (!filled) break;
  }
  return slots;
}

struct GossipsubMesh {
  OverlayGraph graph;
  TopicLinks links;  // each slot's link carries only the slot's topic
};

inline GossipsubMesh gossipsub_like_mesh(const SubscriptionTable& subs, std::size_t d, Rng& rng) {
  GossipsubMesh mesh{OverlayGraph(subs.num_nodes(), d), TopicLinks(subs.num_nodes(), subs.num_topics())};
  for (std::size_t v = 0; v < subs.num_nodes(); ++v) {
    const NodeId self = NodeId::from(v);
    std::vector<NodeId> out;
    for (const auto& s : gossipsub_node_slots(self, subs, d, rng)) {
      out.push_back(s.peer);
      mesh.links.add(self, s.peer, s.topic);
    }
    mesh.graph.set_outgoing(self, std::move(out));
  }
  return mesh;
}

inline OverlayGraph gossipsub_like_overlay(const SubscriptionTable& subs, std::size_t d, Rng& rng) {
  return gossipsub_like_mesh(subs, d, rng).graph;
}

enum class ScribeGrouping { random, by_topic };

inline std::vector<std::vector<NodeId>> scribe_groups(const SubscriptionTable& subs,
                                                      ScribeGrouping grouping,
                                                      std::size_t num_groups, Rng& rng) {
  std::vector<std::vector<NodeId>> groups;
  if (grouping == ScribeGrouping::by_topic) {
    for (std::size_t t = 0; t < subs.num_topics(); ++t) {
      auto members = subs.subscribers_of(TopicId::from(t));
      groups.emplace_back(members.begin(), members.end());
    }
    return groups;
  }
  if (num_groups == 0) throw ConfigError("scribe needs at least one group");
  groups.resize(num_groups);
  std::uniform_int_distribution<std::size_t> pick(0, num_groups - 1);
  for (std::size_t v = 0; v < subs.num_nodes(); ++v) groups[pick(rng)].push_back(NodeId::from(v));
  return groups;
}

/// Per-group trees. Members are taken in id order; the lowest id is the root
/// and each later member hangs off the first earlier member that is already
/// linked to it or still has outgoing capacity. The cap d is global across
/// groups, so a member finding no such parent stays detached from that tree.
inline OverlayGraph scribe_overlay(const SubscriptionTable& subs, std::size_t d,
                                   ScribeGrouping grouping, std::size_t num_groups, Rng& rng) {
  const std::size_t n = subs.num_nodes();
  auto groups = scribe_groups(subs, grouping, num_groups, rng);
  std::vector<std::vector<NodeId>> out(n);
  auto linked = [&](NodeId a, NodeId b) {
    auto has = [](const std::vector<NodeId>& l, NodeId x) {
      return std::find(l.begin(), l.end(), x) != l.end();
    };
    return has(out[a.value], b) || has(out[b.value], a);
  };
  for (auto& members : groups) {
    std::sort(members.begin(), members.end());
    for (std::size_t i = 1; i < members.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        NodeId parent = members[j];
        if (linked(parent, members[i])) break;
        if (out[parent.value].size() < d) {
          out[parent.value].push_back(members[i]);
          break;
        }
      }
    }
  }
  OverlayGraph g(n, d);
  for (std::size_t v = 0; v < n; ++v) g.set_outgoing(NodeId::from(v), std::move(out[v]));
  return g;
}

}  // namespace topiary
