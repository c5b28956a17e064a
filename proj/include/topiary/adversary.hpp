#pragma once

#include <algorithm>
#include <iterator>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "topiary/gossip.hpp"
#include "topiary/net_model.hpp"

namespace topiary {

enum class AttackKind { none, topic_withhold, eclipse };

inline constexpr std::string_view attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::topic_withhold: return "topic-withhold";
    case AttackKind::eclipse: return "eclipse";
  }
  return "unknown";
}

inline std::optional<AttackKind> parse_attack(std::string_view name) {
  for (auto k : {AttackKind::none, AttackKind::topic_withhold, AttackKind::eclipse})
    if (attack_name(k) == name) return k;
  return std::nullopt;
}

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  std::size_t attacker_count = 0;
  TopicId victim_topic{0};
  bool eclipse_withhold = false;  // eclipse cohort drops everything instead of relaying

  bool active() const { return kind != AttackKind::none && attacker_count > 0; }
};

/// Membership flags for an attacker cohort.
class AttackerSet {
 public:
  AttackerSet() = default;
  AttackerSet(std::size_t n, std::span<const NodeId> members) : flags_(n, 0) {
    for (NodeId v : members) {
      if (v.value >= n) throw ConfigError("attacker id out of range");
      flags_[v.value] = 1;
    }
    for (std::size_t v = 0; v < n; ++v)
      if (flags_[v]) members_.push_back(NodeId::from(v));
  }

  bool contains(NodeId v) const { return v.value < flags_.size() && flags_[v.value] != 0; }
  std::span<const NodeId> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

  std::vector<NodeId> honest() const {
    std::vector<NodeId> out;
    for (std::size_t v = 0; v < flags_.size(); ++v)
      if (!flags_[v]) out.push_back(NodeId::from(v));
    return out;
  }

 private:
  std::vector<std::uint8_t> flags_;
  std::vector<NodeId> members_;
};

inline AttackerSet choose_attackers(std::size_t n, std::size_t count, Rng& rng) {
  if (count >= n) throw ConfigError("attacker count must be below the node count");
  std::vector<NodeId> all;
  all.reserve(n);
  for (std::size_t v = 0; v < n; ++v) all.push_back(NodeId::from(v));
  std::vector<NodeId> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return AttackerSet(n, picked);
}

/// Attackers keep receiving victim-topic messages but never relay them.
/// Returns the relay overrides; attackers must also be subscribed to the
/// victim topic (see SubscriptionTable::with_forced).
inline RelayOverrides apply_topic_withhold(std::size_t n, const AttackerSet& attackers,
                                           TopicId victim) {
  RelayOverrides o(n);
  for (NodeId a : attackers.members()) o.withhold(a, victim);
  return o;
}

/// Pins a full clique among attackers outside their degree budget and points
/// their budgeted outgoing links at uniformly drawn honest nodes.
inline void apply_eclipse(OverlayGraph& overlay, const AttackerSet& attackers, Rng& rng) {
  const auto honest = attackers.honest();
  for (NodeId a : attackers.members()) {
    const std::size_t d = overlay.degree_bound(a);
    if (honest.size() < d) throw ConfigError("too few honest nodes for attacker outgoing links");
    overlay.set_outgoing(a, sample_distinct(overlay.size(), a, d, rng, honest));
    for (NodeId b : attackers.members())
      if (a != b) overlay.add_pinned(a, b);
  }
}

/// Share of the observers' budgeted outgoing links that point at attackers.
inline double attacker_outgoing_fraction(const OverlayGraph& overlay, const AttackerSet& attackers,
                                         std::span<const NodeId> observers) {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (NodeId v : observers) {
    for (NodeId u : overlay.outgoing(v)) {
      ++total;
      if (attackers.contains(u)) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

/// Largest per-node attacker share over the observers.
inline double max_attacker_share(const OverlayGraph& overlay, const AttackerSet& attackers,
                                 std::span<const NodeId> observers) {
  double worst = 0;
  for (NodeId v : observers) {
    NodeId one[] = {v};
    worst = std::max(worst, attacker_outgoing_fraction(overlay, attackers, one));
  }
  return worst;
}

/// Per epoch, the attacker share of honest nodes' outgoing links (or of the
/// given observers' links).
inline std::vector<double> eviction_curve(std::span<const OverlayGraph> overlays,
                                          const AttackerSet& attackers,
                                          std::optional<std::vector<NodeId>> observers = {}) {
  const std::vector<NodeId> who = observers ? *observers : attackers.honest();
  std::vector<double> curve;
  curve.reserve(overlays.size());
  for (const auto& g : overlays) curve.push_back(attacker_outgoing_fraction(g, attackers, who));
  return curve;
}

}  // namespace topiary
