#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "topiary/net_model.hpp"
#include "topiary/scoring.hpp"

namespace topiary {

struct PerTopicScore {
  TopicId topic;
  double delay = 0;     // F_d restricted to the topic
  double coverage = 0;  // per-topic miss fraction
  double total = 0;     // w_c * coverage + w_d * delay
};

inline std::vector<PerTopicScore> per_topic_scores(const ScoringTable& table, SubsetMask retained,
                                                   const InterestSet& interests,
                                                   std::span<const std::size_t> published_counts,
                                                   const ScoreWeights& w) {
  std::vector<PerTopicScore> out;
  out.reserve(interests.size());
  for (TopicId t : interests.topics()) {
    const std::size_t expected = t.value < published_counts.size() ? published_counts[t.value] : 0;
    if (expected == 0)
      throw ConfigError("no messages expected on subscribed topic " + std::to_string(t.value));
    PerTopicScore s;
    s.topic = t;
    s.delay = table.delay(retained, t);
    s.coverage = coverage_from_counts(table.delivered(retained, t), expected, w.coverage_form);
    s.total = w.coverage * s.coverage + w.delay * s.delay;
    out.push_back(s);
  }
  return out;
}

inline std::vector<PerTopicScore> per_topic_scores(std::span<const NodeId> retained,
                                                   const ObservationLog& log,
                                                   const InterestSet& interests,
                                                   std::span<const std::size_t> published_counts,
                                                   const ScoreWeights& w) {
  ScoringTable table(log, retained, interests);
  return per_topic_scores(table, table.full_mask(), interests, published_counts, w);
}

/// Topics whose score exceeds eta times the best (lowest) topic score.
inline std::vector<TopicId> underperforming_topics(std::span<const PerTopicScore> scores,
                                                   double eta) {
  std::vector<TopicId> out;
  if (scores.empty()) return out;
  double best = scores.front().total;
  for (const auto& s : scores) best = std::min(best, s.total);
  for (const auto& s : scores)
    if (s.total > eta * best) out.push_back(s.topic);
  return out;
}

struct CandidateWeight {
  NodeId node;
  std::size_t weight = 0;  // |sigma_u ∩ sigma_plus|

  friend bool operator==(const CandidateWeight&, const CandidateWeight&) = default;
};

/// Weight for every node outside `exclude`, ordered by node id.
inline std::vector<CandidateWeight> candidate_weights(std::span<const TopicId> sigma_plus,
                                                      const SubscriptionTable& subs,
                                                      std::span<const NodeId> exclude) {
  std::vector<std::uint8_t> skip(subs.num_nodes(), 0);
  for (NodeId u : exclude)
    if (u.value < skip.size()) skip[u.value] = 1;
  std::vector<CandidateWeight> out;
  out.reserve(subs.num_nodes());
  for (std::size_t u = 0; u < subs.num_nodes(); ++u) {
    if (skip[u]) continue;
    std::size_t w = 0;
    for (TopicId t : sigma_plus)
      if (subs.subscribes(NodeId::from(u), t)) ++w;
    out.push_back(CandidateWeight{NodeId::from(u), w});
  }
  return out;
}

/// Sequential draws without replacement, each proportional to weight among
/// the remaining candidates. Once every remaining weight is zero the draws
/// continue uniformly.
inline std::vector<NodeId> sample_replacements(std::span<const CandidateWeight> weights,
                                               std::size_t count, Rng& rng) {
  if (count > weights.size())
    throw SamplingError("candidate pool of " + std::to_string(weights.size()) +
                        " is smaller than the " + std::to_string(count) + " replacements requested");
  std::vector<CandidateWeight> pool(weights.begin(), weights.end());
  std::vector<NodeId> picked;
  picked.reserve(count);
  std::vector<double> w;
  while (picked.size() < count) {
    w.clear();
    double total = 0;
    for (const auto& c : pool) {
      w.push_back(static_cast<double>(c.weight));
      total += static_cast<double>(c.weight);
    }
    std::size_t i;
    if (total > 0) {
      std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
      i = dist(rng);
    } else {
      std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
      i = dist(rng);
    }
    picked.push_back(pool[i].node);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return picked;
}

struct ExplorationPlan {
  std::vector<PerTopicScore> topic_scores;
  std::vector<TopicId> underperforming;  // sigma_plus
  std::vector<CandidateWeight> weights;
  std::vector<NodeId> sampled;
};

/// Full exploration step for `self` after retaining `retained`.
inline ExplorationPlan plan_exploration(NodeId self, const ScoringTable& table, SubsetMask retained,
                                        const InterestSet& interests,
                                        std::span<const std::size_t> published_counts,
                                        const SubscriptionTable& subs, const ScoreWeights& w,
                                        std::size_t count, Rng& rng) {
  ExplorationPlan plan;
  plan.topic_scores = per_topic_scores(table, retained, interests, published_counts, w);
  plan.underperforming = underperforming_topics(plan.topic_scores, w.eta);
  std::vector<NodeId> exclude = table.members(retained);
  exclude.push_back(self);
  plan.weights = candidate_weights(plan.underperforming, subs, exclude);
  plan.sampled = sample_replacements(plan.weights, count, rng);
  return plan;
}

}  // namespace topiary
