#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "topiary/net_model.hpp"
#include "topiary/types.hpp"

namespace topiary {

struct Message {
  MessageId id = 0;
  TopicId topic;
  NodeId publisher;
  Time publish_time = 0;
  int initial_ttl = 1;
};

struct DeliveryEvent {
  MessageId message = 0;
  TopicId topic;
  NodeId sender;
  NodeId receiver;
  Time arrival_time = 0;
  int ttl_on_arrival = 0;
};

/// What one node saw during an epoch: for every message it received, the
/// earliest time each neighbor delivered it.
class ObservationLog {
 public:
  struct Entry {
    NodeId neighbor;
    Time time;
  };
  struct Record {
    MessageId message;
    TopicId topic;
    Time first;  // earliest delivery over all neighbors
    std::vector<Entry> senders;
  };

  ObservationLog() = default;
  explicit ObservationLog(NodeId owner) : owner_(owner) {}

  NodeId owner() const { return owner_; }

  void record(const DeliveryEvent& ev) {
    if (ev.receiver != owner_)
      throw std::invalid_argument("delivery event recorded in another node's log");
    auto [it, inserted] = index_.try_emplace(ev.message, records_.size());
    if (inserted) {
      records_.push_back(Record{ev.message, ev.topic, ev.arrival_time,
                                {Entry{ev.sender, ev.arrival_time}}});
      return;
    }
    Record& rec = records_[it->second];
    rec.first = std::min(rec.first, ev.arrival_time);
    for (Entry& e : rec.senders) {
      if (e.neighbor == ev.sender) {
        e.time = std::min(e.time, ev.arrival_time);
        return;
      }
    }
    rec.senders.push_back(Entry{ev.sender, ev.arrival_time});
  }

  std::span<const Record> records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  const Record* find(MessageId m) const {
    auto it = index_.find(m);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  /// Absolute delivery time of m by u, kNever when u never sent it.
  Time timestamp(MessageId m, NodeId u) const {
    const Record* rec = find(m);
    if (rec == nullptr) return kNever;
    for (const Entry& e : rec->senders)
      if (e.neighbor == u) return e.time;
    return kNever;
  }

  /// Delivery time relative to the first copy of m to arrive.
  Time normalized(MessageId m, NodeId u) const {
    const Record* rec = find(m);
    if (rec == nullptr) return kNever;
    Time t = timestamp(m, u);
    return t == kNever ? kNever : t - rec->first;
  }

 private:
  NodeId owner_;
  std::vector<Record> records_;
  std::unordered_map<MessageId, std::size_t> index_;
};

/// Per-node relay suppression used by adversaries: a node can drop every
/// message, or only messages of particular topics.
class RelayOverrides {
 public:
  RelayOverrides() = default;
  explicit RelayOverrides(std::size_t n) : all_(n, 0), topics_(n) {}

  void withhold_all(NodeId v) {
    ensure(v);
    all_[v.value] = 1;
  }
  void withhold(NodeId v, TopicId t) {
    ensure(v);
    topics_[v.value].push_back(t);
  }

  bool withholds(NodeId v, TopicId t) const {
    if (v.value >= all_.size()) return false;
    if (all_[v.value]) return true;
    const auto& l = topics_[v.value];
    return std::find(l.begin(), l.end(), t) != l.end();
  }

  bool empty() const {
    return std::none_of(all_.begin(), all_.end(), [](auto f) { return f != 0; }) &&
           std::all_of(topics_.begin(), topics_.end(), [](const auto& l) { return l.empty(); });
  }

 private:
  void ensure(NodeId v) {
    if (v.value >= all_.size()) {
      all_.resize(v.value + 1, 0);
      topics_.resize(v.value + 1);
    }
  }

  std::vector<std::uint8_t> all_;
  std::vector<std::vector<TopicId>> topics_;
};

/// Targets for a first-time receipt. A positive TTL floods every neighbor but
/// the sender; a zero TTL reaches only neighbors subscribed to the topic.
/// `from` is empty for the publisher's own initial send.
inline std::vector<NodeId> relay_decision(NodeId node, TopicId topic, int ttl_after_receipt,
                                          std::optional<NodeId> from,
                                          const SubscriptionTable& subs,
                                          std::span<const NodeId> neighbors,
                                          const RelayOverrides* overrides = nullptr) {
  std::vector<NodeId> targets;
  if (ttl_after_receipt < 0) return targets;
  if (overrides != nullptr && from.has_value() && overrides->withholds(node, topic))
    return targets;
  targets.reserve(neighbors.size());
  for (NodeId u : neighbors) {
    if (from && u == *from) continue;
    if (ttl_after_receipt > 0 || subs.subscribes(u, topic)) targets.push_back(u);
  }
  return targets;
}

struct Arrival {
  NodeId node;
  TopicId topic;
  int ttl_on_arrival = 0;
  std::optional<NodeId> from;
  bool duplicate = false;
};

struct RelayOutcome {
  int ttl_after_receipt = 0;
  std::vector<NodeId> targets;
};

/// Receipt handling in order: duplicate check, TTL decrement at uninterested
/// nodes, then the relay decision on the decremented TTL.
inline RelayOutcome process_arrival(const Arrival& a, const SubscriptionTable& subs,
                                    std::span<const NodeId> neighbors,
                                    const RelayOverrides* overrides = nullptr) {
  RelayOutcome out;
  out.ttl_after_receipt = a.ttl_on_arrival;
  if (a.duplicate) return out;
  if (!subs.subscribes(a.node, a.topic)) out.ttl_after_receipt -= 1;
  out.targets =
      relay_decision(a.node, a.topic, out.ttl_after_receipt, a.from, subs, neighbors, overrides);
  return out;
}

// ---------------------------------------------------------------------------
// Epoch simulation
// ---------------------------------------------------------------------------

struct Receipt {
  NodeId receiver;
  Time time;
  int ttl_on_arrival;
};

struct MessageTrace {
  Message message;
  // First receipt per node in dispatch order. The publisher is always first,
  // at publish time with the initial TTL.
  std::vector<Receipt> receipts;
};

struct EpochTrace {
  std::vector<MessageTrace> messages;
  std::vector<std::size_t> published_counts;  // per topic
  std::vector<ObservationLog> logs;           // per node
  std::vector<DeliveryEvent> deliveries;      // only with EngineOptions::record_deliveries
};

struct EngineOptions {
  bool record_deliveries = false;
};

/// Publications for one epoch: message k goes to topic k mod |topics| in round
/// k / |topics|, published by a uniformly drawn subscriber.
inline std::vector<Message> make_schedule(const SubscriptionTable& subs,
                                          std::size_t messages_per_epoch, Time round_interval,
                                          int initial_ttl, Rng& rng) {
  const std::size_t topics = subs.num_topics();
  std::vector<Message> schedule;
  schedule.reserve(messages_per_epoch);
  for (std::size_t k = 0; k < messages_per_epoch; ++k) {
    TopicId topic = TopicId::from(k % topics);
    auto candidates = subs.subscribers_of(topic);
    if (candidates.empty())
      throw SchedulingError("topic " + std::to_string(topic.value) + " has no subscriber");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    schedule.push_back(Message{static_cast<MessageId>(k), topic, candidates[pick(rng)],
                               static_cast<Time>(k / topics) * round_interval, initial_ttl});
  }
  return schedule;
}

/// Per-topic neighbor lists, for overlays whose links each carry one topic.
/// Links are symmetric: adding (a, b, t) makes each a t-neighbor of the other.
class TopicLinks {
 public:
  TopicLinks() = default;
  TopicLinks(std::size_t n, std::size_t topics) : topics_(topics), lists_(n * topics) {}

  void add(NodeId a, NodeId b, TopicId t) {
    insert(lists_[a.value * topics_ + t.value], b);
    insert(lists_[b.value * topics_ + t.value], a);
  }
  std::span<const NodeId> neighbors(NodeId v, TopicId t) const {
    return lists_[v.value * topics_ + t.value];
  }
  std::size_t size() const { return topics_ == 0 ? 0 : lists_.size() / topics_; }
  std::size_t num_topics() const { return topics_; }

 private:
  static void insert(std::vector<NodeId>& l, NodeId x) {
    auto it = std::lower_bound(l.begin(), l.end(), x);
    if (it == l.end() || *it != x) l.insert(it, x);
  }
  std::size_t topics_ = 0;
  std::vector<std::vector<NodeId>> lists_;
};

/// Event-driven propagation of every scheduled message to quiescence.
/// `neighbors_of(node, topic)` gives the links a message on `topic` may take
/// out of `node`.
template <typename NeighborFn>
EpochTrace run_epoch_with(std::size_t n, NeighborFn&& neighbors_of, const SubscriptionTable& subs,
                          const LatencyModel& lat, std::span<const Message> schedule,
                          const RelayOverrides* overrides = nullptr, EngineOptions opts = {}) {
  if (subs.num_nodes() != n || lat.size() != n)
    throw ConfigError("overlay, subscriptions and latency model disagree on node count");

  EpochTrace trace;
  trace.published_counts.assign(subs.num_topics(), 0);
  trace.logs.reserve(n);
  for (std::size_t v = 0; v < n; ++v) trace.logs.emplace_back(NodeId::from(v));
  trace.messages.reserve(schedule.size());

  struct Pending {
    Time arrival;
    std::uint64_t seq;
    std::uint32_t msg;  // index into schedule
    NodeId sender;
    NodeId receiver;
    int ttl;
    bool publish;
  };
  auto later = [](const Pending& a, const Pending& b) {
    return a.arrival != b.arrival ? a.arrival > b.arrival : a.seq > b.seq;
  };
  std::priority_queue<Pending, std::vector<Pending>, decltype(later)> queue(later);
  std::uint64_t seq = 0;

  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Message& m = schedule[i];
    if (!subs.subscribes(m.publisher, m.topic))
      throw SchedulingError("publisher " + std::to_string(m.publisher.value) +
                            " is not subscribed to topic " + std::to_string(m.topic.value));
    trace.published_counts[m.topic.value] += 1;
    trace.messages.push_back(MessageTrace{m, {}});
    queue.push(Pending{m.publish_time, seq++, static_cast<std::uint32_t>(i), m.publisher,
                       m.publisher, m.initial_ttl, true});
  }

  std::vector<std::uint8_t> seen(schedule.size() * n, 0);

  auto send_all = [&](const Pending& at, NodeId from_node, const std::vector<NodeId>& targets,
                      int ttl) {
    const Time departure = at.arrival + lat.processing(from_node);
    for (NodeId u : targets)
      queue.push(Pending{departure + lat.link(from_node, u), seq++, at.msg, from_node, u, ttl,
                         false});
  };

  while (!queue.empty()) {
    const Pending ev = queue.top();
    queue.pop();
    const Message& m = schedule[ev.msg];
    MessageTrace& mt = trace.messages[ev.msg];
    auto& seen_flag = seen[ev.msg * n + ev.receiver.value];

    if (ev.publish) {
      seen_flag = 1;
      mt.receipts.push_back(Receipt{m.publisher, ev.arrival, m.initial_ttl});
      send_all(ev, m.publisher,
               relay_decision(m.publisher, m.topic, m.initial_ttl, std::nullopt, subs,
                              neighbors_of(m.publisher, m.topic), overrides),
               m.initial_ttl);
      continue;
    }

    DeliveryEvent de{m.id, m.topic, ev.sender, ev.receiver, ev.arrival, ev.ttl};
    if (opts.record_deliveries) trace.deliveries.push_back(de);
    if (ev.receiver != m.publisher) trace.logs[ev.receiver.value].record(de);

    const bool duplicate = seen_flag != 0;
    if (!duplicate) {
      seen_flag = 1;
      mt.receipts.push_back(Receipt{ev.receiver, ev.arrival, ev.ttl});
    }
    auto outcome = process_arrival(Arrival{ev.receiver, m.topic, ev.ttl, ev.sender, duplicate},
                                   subs, neighbors_of(ev.receiver, m.topic), overrides);
    if (!outcome.targets.empty()) send_all(ev, ev.receiver, outcome.targets, outcome.ttl_after_receipt);
  }
  return trace;
}

/// Propagation over symmetric neighbor lists shared by every topic.
inline EpochTrace run_epoch(const std::vector<std::vector<NodeId>>& neighbors,
                            const SubscriptionTable& subs, const LatencyModel& lat,
                            std::span<const Message> schedule,
                            const RelayOverrides* overrides = nullptr, EngineOptions opts = {}) {
  auto of = [&](NodeId v, TopicId) { return std::span<const NodeId>(neighbors[v.value]); };
  return run_epoch_with(neighbors.size(), of, subs, lat, schedule, overrides, opts);
}

/// Propagation where each topic only travels over its own links.
inline EpochTrace run_epoch(const TopicLinks& links, const SubscriptionTable& subs,
                            const LatencyModel& lat, std::span<const Message> schedule,
                            const RelayOverrides* overrides = nullptr, EngineOptions opts = {}) {
  if (links.num_topics() != subs.num_topics())
    throw ConfigError("topic links and subscriptions disagree on topic count");
  auto of = [&](NodeId v, TopicId t) { return links.neighbors(v, t); };
  return run_epoch_with(links.size(), of, subs, lat, schedule, overrides, opts);
}

inline EpochTrace run_epoch(const OverlayGraph& overlay, const SubscriptionTable& subs,
                            const LatencyModel& lat, std::span<const Message> schedule,
                            const RelayOverrides* overrides = nullptr, EngineOptions opts = {}) {
  return run_epoch(overlay.effective_neighbors(), subs, lat, schedule, overrides, opts);
}

/// Trace rows: one per (message, first receipt), publisher row included.
inline void write_trace_csv(std::ostream& os, const EpochTrace& trace) {
  os << "msg_id,topic,publisher,publish_time,receiver,first_receipt_time,ttl_on_arrival\n";
  for (const auto& mt : trace.messages)
    for (const auto& r : mt.receipts)
      csv::row(os, mt.message.id, mt.message.topic.value, mt.message.publisher.value,
               csv::format_real(mt.message.publish_time), r.receiver.value,
               csv::format_real(r.time), r.ttl_on_arrival);
}

/// Rebuilds the message/receipt part of a trace from write_trace_csv output.
/// Observation logs are not part of the file and come back empty.
inline EpochTrace read_trace_csv(std::istream& in, std::size_t num_topics) {
  EpochTrace trace;
  trace.published_counts.assign(num_topics, 0);
  std::string line;
  std::getline(in, line);  // header
  std::unordered_map<MessageId, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    auto cells = csv::split(line);
    auto bad = [&] { return IngestionError("trace csv line " + std::to_string(lineno) + " malformed"); };
    if (cells.size() != 7) throw bad();
    auto id = csv::parse_int<MessageId>(cells[0]);
    auto topic = csv::parse_int<std::uint32_t>(cells[1]);
    auto pub = csv::parse_int<std::uint32_t>(cells[2]);
    auto pub_time = csv::parse_real(cells[3]);
    auto recv = csv::parse_int<std::uint32_t>(cells[4]);
    auto t = csv::parse_real(cells[5]);
    auto ttl = csv::parse_int<int>(cells[6]);
    if (!id || !topic || !pub || !pub_time || !recv || !t || !ttl || *topic >= num_topics)
      throw bad();
    auto [it, inserted] = index.try_emplace(*id, trace.messages.size());
    if (inserted) {
      trace.messages.push_back(MessageTrace{
          Message{*id, TopicId(*topic), NodeId(*pub), *pub_time, *ttl}, {}});
      trace.published_counts[*topic] += 1;
    }
    trace.messages[it->second].receipts.push_back(Receipt{NodeId(*recv), *t, *ttl});
  }
  return trace;
}

}  // namespace topiary
