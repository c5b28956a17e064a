#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "topiary/gossip.hpp"
#include "topiary/net_model.hpp"

namespace topiary {

/// Which messages and which subscribers a measure looks at. Defaults to all.
struct MetricFilter {
  std::optional<TopicId> topic;
  std::function<bool(NodeId)> counts_subscriber;  // empty: every subscriber counts

  bool subscriber_counted(NodeId v) const { return !counts_subscriber || counts_subscriber(v); }
};

/// Mean over messages of the fraction of the topic's other subscribers that
/// received the message. The publisher is left out of both sides; messages
/// with no other subscriber are skipped. Empty when no message qualified.
inline std::optional<double> receive_rate(const EpochTrace& trace, const SubscriptionTable& subs,
                                          const MetricFilter& filter = {}) {
  double sum = 0;
  std::size_t messages = 0;
  for (const auto& mt : trace.messages) {
    const Message& m = mt.message;
    if (filter.topic && m.topic != *filter.topic) continue;
    std::size_t audience = 0;
    for (NodeId u : subs.subscribers_of(m.topic))
      if (u != m.publisher && filter.subscriber_counted(u)) ++audience;
    if (audience == 0) continue;
    std::size_t got = 0;
    for (const auto& r : mt.receipts)
      if (r.receiver != m.publisher && subs.subscribes(r.receiver, m.topic) &&
          filter.subscriber_counted(r.receiver))
        ++got;
    sum += static_cast<double>(got) / static_cast<double>(audience);
    ++messages;
  }
  if (messages == 0) return std::nullopt;
  return sum / static_cast<double>(messages);
}

/// Mean publish-to-first-receipt time over every (message, receiving
/// subscriber) pair. Empty when nothing was delivered.
inline std::optional<double> avg_propagation_delay(const EpochTrace& trace,
                                                   const SubscriptionTable& subs,
                                                   const MetricFilter& filter = {}) {
  double sum = 0;
  std::size_t pairs = 0;
  for (const auto& mt : trace.messages) {
    const Message& m = mt.message;
    if (filter.topic && m.topic != *filter.topic) continue;
    for (const auto& r : mt.receipts) {
      if (r.receiver == m.publisher || !subs.subscribes(r.receiver, m.topic) ||
          !filter.subscriber_counted(r.receiver))
        continue;
      sum += r.time - m.publish_time;
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / static_cast<double>(pairs);
}

struct ScoreStatistics {
  std::optional<double> average;
  std::vector<double> distribution;  // ascending
};

inline ScoreStatistics score_statistics(std::vector<double> scores) {
  ScoreStatistics s;
  std::sort(scores.begin(), scores.end());
  if (!scores.empty())
    s.average = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  s.distribution = std::move(scores);
  return s;
}

struct TopicBreakdown {
  TopicId topic;
  std::optional<double> receive_rate;
  std::optional<double> avg_delay;
};

struct EpochReport {
  std::size_t epoch = 0;
  std::optional<double> receive_rate;
  std::optional<double> avg_delay;
  std::optional<double> avg_neighbor_score;
  std::vector<double> score_distribution;
  std::vector<TopicBreakdown> topics;
  std::size_t messages = 0;
  std::size_t deliveries = 0;  // first receipts, publishers excluded
};

/// Receive rate and delay, overall and per topic. Score fields are filled in
/// by the caller once nodes have scored their neighbors.
inline EpochReport measure_epoch(std::size_t epoch, const EpochTrace& trace,
                                 const SubscriptionTable& subs) {
  EpochReport r;
  r.epoch = epoch;
  r.receive_rate = receive_rate(trace, subs);
  r.avg_delay = avg_propagation_delay(trace, subs);
  r.messages = trace.messages.size();
  // Per-topic values in one pass; same arithmetic as the filtered measures.
  const std::size_t topics = subs.num_topics();
  std::vector<double> rate_sum(topics, 0), delay_sum(topics, 0);
  std::vector<std::size_t> rate_n(topics, 0), delay_n(topics, 0);
  for (const auto& mt : trace.messages) {
    const Message& m = mt.message;
    r.deliveries += mt.receipts.size() - 1;
    std::size_t got = 0;
    for (const auto& rc : mt.receipts) {
      if (rc.receiver == m.publisher || !subs.subscribes(rc.receiver, m.topic)) continue;
      ++got;
      delay_sum[m.topic.value] += rc.time - m.publish_time;
      ++delay_n[m.topic.value];
    }
    const std::size_t audience = subs.subscribers_of(m.topic).size() - 1;
    if (audience == 0) continue;
    rate_sum[m.topic.value] += static_cast<double>(got) / static_cast<double>(audience);
    ++rate_n[m.topic.value];
  }
  for (std::size_t t = 0; t < topics; ++t) {
    TopicBreakdown b{TopicId::from(t), std::nullopt, std::nullopt};
    if (rate_n[t] > 0) b.receive_rate = rate_sum[t] / static_cast<double>(rate_n[t]);
    if (delay_n[t] > 0) b.avg_delay = delay_sum[t] / static_cast<double>(delay_n[t]);
    r.topics.push_back(b);
  }
  return r;
}

/// Least-squares slope of ys against xs.
inline double linear_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return den == 0 ? 0.0 : num / den;
}

}  // namespace topiary
