#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topiary/adversary.hpp"
#include "topiary/config.hpp"
#include "topiary/gossip.hpp"
#include "topiary/metrics.hpp"
#include "topiary/net_model.hpp"
#include "topiary/protocols.hpp"

namespace topiary {

/// Error tagged with the pipeline stage that raised it.
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage(std::move(stage)) {}
  std::string stage;

  /// Runs fn, re-throwing any failure tagged with `name`.
  template <typename Fn>
  static void wrap(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }
};

struct NodeScoreRow {
  NodeId node;
  SubsetScore score;
  bool retained = false;
};

struct ExplorationRow {
  NodeId node;
  std::vector<TopicId> sigma_plus;
  std::vector<NodeId> replaced;
  std::vector<NodeId> added;
};

struct AttackMetrics {
  std::optional<double> victim_coverage;  // withhold runs: honest victim subscribers
  std::optional<double> victim_delay;
  double attacker_fraction = 0;  // attacker share of the observed outgoing links
  double max_attacker_share = 0;  // worst single honest node
};

struct EpochOutcome {
  EpochReport report;
  OverlayGraph overlay;  // the graph this epoch's traffic ran on
  std::optional<AttackMetrics> attack;
  std::vector<NodeScoreRow> scores;         // outputs.score_tables
  std::vector<ExplorationRow> exploration;  // outputs.exploration
  std::optional<EpochTrace> trace;          // outputs.traces
};

/// Gap between publication rounds: ten times a generous bound on how long a
/// message can take to cross the network, so rounds rarely overlap.
inline Time default_round_interval(const LatencyModel& lat) {
  const double hops = std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(lat.size(), 2)))) + 1;
  return 10.0 * hops * (lat.max_link() + lat.max_processing());
}

/// One seeded experiment instance. Construction builds the network; each
/// step() runs one epoch, measures it, and (for Topiary) rewires every node
/// synchronously.
class Simulation {
 public:
  Simulation(const ExperimentConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    stage("build-latency", [&] {
      Rng rng = derive_rng(seed, stream::kLatency);
      if (cfg.network.kind == NetworkKind::unit_square) {
        lat_ = unit_square_latency(cfg.network.nodes, rng, cfg.network.processing_units());
      } else {
        lat_ = matrix_latency(load_latency_matrix(cfg.network.matrix_path),
                              cfg.network.processing_units(), rng);
      }
    });
    const std::size_t n = lat_.size();
    stage("build-subscriptions", [&] {
      Rng rng = derive_rng(seed, stream::kSubscriptions);
      subs_ = build_subscriptions(n, cfg.num_topics, cfg.interest_rate, rng);
    });
    stage("build-attack", [&] {
      if (cfg.attack.kind == AttackKind::none) return;
      Rng rng = derive_rng(seed, stream::kAttackers);
      attackers_ = choose_attackers(n, cfg.attack.attacker_count, rng);
      if (cfg.attack.kind == AttackKind::topic_withhold) {
        subs_ = subs_.with_forced(attackers_.members(), cfg.attack.victim_topic);
        overrides_ = apply_topic_withhold(n, attackers_, cfg.attack.victim_topic);
      } else if (cfg.attack.eclipse_withhold) {
        overrides_ = RelayOverrides(n);
        for (NodeId a : attackers_.members()) overrides_.withhold_all(a);
      }
    });
    stage("build-overlay", [&] {
      Rng rng = derive_rng(seed, stream::kOverlay);
      switch (cfg.policy.kind) {
        case PolicyKind::topiary:
        case PolicyKind::random_static: overlay_ = random_overlay(n, cfg.degree, rng); break;
        case PolicyKind::complete_static: overlay_ = complete_overlay(n); break;
        case PolicyKind::gossipsub_like: {
          auto mesh = gossipsub_like_mesh(subs_, cfg.degree, rng);
          overlay_ = std::move(mesh.graph);
          topic_links_ = std::move(mesh.links);
          break;
        }
        case PolicyKind::scribe_random_groups:
          overlay_ = scribe_overlay(subs_, cfg.degree, ScribeGrouping::random,
                                    cfg.policy.scribe_groups, rng);
          break;
        case PolicyKind::scribe_topic_groups:
          overlay_ = scribe_overlay(subs_, cfg.degree, ScribeGrouping::by_topic, 0, rng);
          break;
      }
      if (cfg.attack.kind == AttackKind::eclipse && !attackers_.empty())
        apply_eclipse(overlay_, attackers_, rng);
    });
    round_interval_ = cfg.round_interval.value_or(default_round_interval(lat_));
    weights_ = cfg.effective_weights();

    honest_ = attackers_.empty() ? std::vector<NodeId>{} : attackers_.honest();
    if (cfg.attack.kind == AttackKind::topic_withhold)
      for (NodeId v : honest_)
        if (subs_.subscribes(v, cfg.attack.victim_topic)) observed_.push_back(v);
    if (cfg.attack.kind == AttackKind::eclipse) observed_ = honest_;
  }

  const SubscriptionTable& subscriptions() const { return subs_; }
  const LatencyModel& latency() const { return lat_; }
  const OverlayGraph& overlay() const { return overlay_; }
  const AttackerSet& attackers() const { return attackers_; }
  std::size_t epoch() const { return epoch_; }
  Time round_interval() const { return round_interval_; }

  /// Static overlays never change and every epoch draws its schedule from its
  /// own stream, so jumping ahead reproduces the epochs of a full run.
  void skip_to(std::size_t epoch) {
    if (!cfg_.policy.is_static()) throw std::logic_error("only static policies can skip epochs");
    if (epoch < epoch_) throw std::logic_error("cannot skip back to an earlier epoch");
    epoch_ = epoch;
  }

  EpochOutcome step() {
    const std::string tag = "epoch " + std::to_string(epoch_);
    EpochOutcome out;
    out.overlay = overlay_;

    std::vector<Message> schedule;
    stage(tag + " schedule", [&] {
      Rng rng = derive_rng(seed_, stream::kPublishers, epoch_);
      schedule = make_schedule(subs_, cfg_.messages_per_epoch, round_interval_, cfg_.initial_ttl, rng);
    });
    EpochTrace trace;
    stage(tag + " propagation", [&] {
      const RelayOverrides* o = overrides_.empty() ? nullptr : &overrides_;
      trace = topic_links_ ? run_epoch(*topic_links_, subs_, lat_, schedule, o)
                           : run_epoch(overlay_, subs_, lat_, schedule, o);
    });
    stage(tag + " metrics", [&] {
      out.report = measure_epoch(epoch_, trace, subs_);
      if (cfg_.attack.kind != AttackKind::none) out.attack = attack_metrics(trace);
    });
    if (cfg_.policy.kind == PolicyKind::topiary) stage(tag + " rewiring", [&] { rewire(trace, out); });
    if (cfg_.outputs.traces) out.trace = std::move(trace);
    ++epoch_;
    return out;
  }

 private:
  template <typename Fn>
  static void stage(const std::string& name, Fn&& fn) {
    StageError::wrap(name, std::forward<Fn>(fn));
  }

  AttackMetrics attack_metrics(const EpochTrace& trace) const {
    AttackMetrics m;
    if (cfg_.attack.kind == AttackKind::topic_withhold) {
      MetricFilter f;
      f.topic = cfg_.attack.victim_topic;
      f.counts_subscriber = [this](NodeId v) { return !attackers_.contains(v); };
      m.victim_coverage = receive_rate(trace, subs_, f);
      m.victim_delay = avg_propagation_delay(trace, subs_, f);
    }
    m.attacker_fraction = attacker_outgoing_fraction(overlay_, attackers_, observed_);
    m.max_attacker_share = max_attacker_share(overlay_, attackers_, honest_);
    return m;
  }

  void rewire(const EpochTrace& trace, EpochOutcome& out) {
    const std::size_t n = lat_.size();
    // Own publications per node, subtracted from the published counts.
    std::vector<std::vector<std::size_t>> own(n);
    for (const auto& mt : trace.messages) {
      auto& counts = own[mt.message.publisher.value];
      if (counts.empty()) counts.assign(subs_.num_topics(), 0);
      counts[mt.message.topic.value] += 1;
    }

    std::vector<double> scores;
    std::vector<std::vector<NodeId>> next(n);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId v = NodeId::from(i);
      auto current = overlay_.outgoing(v);
      next[i].assign(current.begin(), current.end());
      if (cfg_.attack.kind == AttackKind::eclipse && attackers_.contains(v)) continue;

      expected = trace.published_counts;
      if (!own[i].empty())
        for (std::size_t t = 0; t < expected.size(); ++t) expected[t] -= own[i][t];
      Rng rng = derive_rng(seed_, stream::kExplore, i, epoch_);
      TopiaryUpdate up = topiary_epoch_update(v, current, overlay_.degree_bound(v), trace.logs[i],
                                              subs_, expected, weights_, rng,
                                              cfg_.outputs.score_tables);
      if (up.skipped) continue;
      scores.push_back(up.selection.best.total);
      next[i] = up.outgoing;
      if (cfg_.outputs.score_tables)
        for (const auto& s : up.selection.evaluated)
          out.scores.push_back(NodeScoreRow{v, s, s.subset == up.selection.best.subset});
      if (cfg_.outputs.exploration)
        out.exploration.push_back(ExplorationRow{v, up.exploration.underperforming, up.replaced,
                                                 up.exploration.sampled});
    }
    auto stats = score_statistics(std::move(scores));
    out.report.avg_neighbor_score = stats.average;
    out.report.score_distribution = std::move(stats.distribution);
    for (std::size_t i = 0; i < n; ++i) overlay_.set_outgoing(NodeId::from(i), std::move(next[i]));
  }

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  LatencyModel lat_;
  SubscriptionTable subs_;
  OverlayGraph overlay_;
  std::optional<TopicLinks> topic_links_;  // gossipsub-like: per-topic meshes
  AttackerSet attackers_;
  RelayOverrides overrides_;
  std::vector<NodeId> honest_;
  std::vector<NodeId> observed_;
  ScoreWeights weights_;
  Time round_interval_ = 1;
  std::size_t epoch_ = 0;
};

}  // namespace topiary
