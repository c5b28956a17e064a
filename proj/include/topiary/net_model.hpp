#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "topiary/csv.hpp"
#include "topiary/types.hpp"

namespace topiary {

// ---------------------------------------------------------------------------
// Subscriptions
// ---------------------------------------------------------------------------

/// Per-node topic interests over a fixed topic universe.
///
/// Every node subscribes to at least one topic and every topic has at least
/// one subscriber; the constructor rejects tables that break either rule.
class SubscriptionTable {
 public:
  SubscriptionTable() = default;

  SubscriptionTable(std::size_t num_nodes, std::size_t num_topics,
                    std::vector<std::uint8_t> membership, std::size_t regeneration_passes = 0)
      : num_nodes_(num_nodes),
        num_topics_(num_topics),
        membership_(std::move(membership)),
        regeneration_passes_(regeneration_passes) {
    if (membership_.size() != num_nodes_ * num_topics_)
      throw ConfigError("subscription matrix has wrong size");
    node_topics_.assign(num_nodes_, {});
    topic_nodes_.assign(num_topics_, {});
    for (std::size_t v = 0; v < num_nodes_; ++v) {
      for (std::size_t t = 0; t < num_topics_; ++t) {
        if (membership_[v * num_topics_ + t] != 0) {
          node_topics_[v].push_back(TopicId::from(t));
          topic_nodes_[t].push_back(NodeId::from(v));
        }
      }
    }
    for (std::size_t v = 0; v < num_nodes_; ++v)
      if (node_topics_[v].empty())
        throw ConfigError("node " + std::to_string(v) + " subscribes to no topic");
    for (std::size_t t = 0; t < num_topics_; ++t)
      if (topic_nodes_[t].empty())
        throw ConfigError("topic " + std::to_string(t) + " has no subscriber");
  }

  static SubscriptionTable from_lists(std::size_t num_topics,
                                      const std::vector<std::vector<TopicId>>& lists) {
    std::vector<std::uint8_t> m(lists.size() * num_topics, 0);
    for (std::size_t v = 0; v < lists.size(); ++v)
      for (TopicId t : lists[v]) {
        if (t.value >= num_topics) throw ConfigError("topic id out of range");
        m[v * num_topics + t.value] = 1;
      }
    return SubscriptionTable(lists.size(), num_topics, std::move(m));
  }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_topics() const { return num_topics_; }

  bool subscribes(NodeId v, TopicId t) const {
    return membership_[v.value * num_topics_ + t.value] != 0;
  }
  std::span<const TopicId> topics_of(NodeId v) const { return node_topics_[v.value]; }
  std::span<const NodeId> subscribers_of(TopicId t) const { return topic_nodes_[t.value]; }

  /// Number of repair passes build_subscriptions needed to satisfy the
  /// non-empty row/column rules.
  std::size_t regeneration_passes() const { return regeneration_passes_; }

  /// Copy with the given nodes additionally subscribed to `topic`.
  SubscriptionTable with_forced(std::span<const NodeId> nodes, TopicId topic) const {
    auto m = membership_;
    for (NodeId v : nodes) m[v.value * num_topics_ + topic.value] = 1;
    return SubscriptionTable(num_nodes_, num_topics_, std::move(m), regeneration_passes_);
  }

  void write_csv(std::ostream& os) const {
    os << "node_id,topic_id\n";
    for (std::size_t v = 0; v < num_nodes_; ++v)
      for (TopicId t : node_topics_[v]) csv::row(os, v, t.value);
  }

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_topics_ = 0;
  std::vector<std::uint8_t> membership_;
  std::vector<std::vector<TopicId>> node_topics_;
  std::vector<std::vector<NodeId>> topic_nodes_;
  std::size_t regeneration_passes_ = 0;
};

inline constexpr std::size_t kDefaultSubscriptionRetries = 1000;

/// Independent Bernoulli(interest_rate) draw for each (node, topic) pair.
/// Empty rows and columns are redrawn individually until the table is valid.
inline SubscriptionTable build_subscriptions(std::size_t n, std::size_t num_topics,
                                             double interest_rate, Rng& rng,
                                             std::size_t max_passes = kDefaultSubscriptionRetries) {
  if (n == 0 || num_topics == 0) throw ConfigError("need at least one node and one topic");
  if (!(interest_rate > 0.0 && interest_rate <= 1.0))
    throw ConfigError("interest rate must lie in (0, 1]");

  std::bernoulli_distribution coin(interest_rate);
  std::vector<std::uint8_t> m(n * num_topics);
  for (auto& cell : m) cell = coin(rng) ? 1 : 0;

  auto row_empty = [&](std::size_t v) {
    for (std::size_t t = 0; t < num_topics; ++t)
      if (m[v * num_topics + t]) return false;
    return true;
  };
  auto col_empty = [&](std::size_t t) {
    for (std::size_t v = 0; v < n; ++v)
      if (m[v * num_topics + t]) return false;
    return true;
  };

  std::size_t passes = 0;
  while (true) {
    bool repaired = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (!row_empty(v)) continue;
      repaired = true;
      for (std::size_t t = 0; t < num_topics; ++t) m[v * num_topics + t] = coin(rng) ? 1 : 0;
    }
    for (std::size_t t = 0; t < num_topics; ++t) {
      if (!col_empty(t)) continue;
      repaired = true;
      for (std::size_t v = 0; v < n; ++v) m[v * num_topics + t] = coin(rng) ? 1 : 0;
    }
    // A column redraw can empty a row checked earlier, so any repair means
    // another full pass.
    if (!repaired) break;
    if (++passes > max_passes)
      throw ConfigError("could not draw a subscription table with non-empty rows and columns "
                        "after " + std::to_string(max_passes) + " passes; interest rate too low");
  }
  return SubscriptionTable(n, num_topics, std::move(m), passes);
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

struct Point {
  double x = 0;
  double y = 0;
};

/// Range of the uniform per-node processing delay.
struct ProcessingDelay {
  Time min = 0.5;
  Time max = 1.5;
};

/// Symmetric pairwise link delays plus per-node header-processing delays.
class LatencyModel {
 public:
  LatencyModel() = default;

  LatencyModel(std::size_t n, std::vector<Time> links, std::vector<Time> processing)
      : n_(n), links_(std::move(links)), processing_(std::move(processing)) {
    if (links_.size() != n_ * n_) throw ConfigError("latency matrix has wrong size");
    if (processing_.size() != n_) throw ConfigError("processing delay vector has wrong size");
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        Time a = links_[i * n_ + j];
        if (!(a >= 0.0)) throw ConfigError("negative or NaN link latency");
        if (a != links_[j * n_ + i]) throw ConfigError("latency matrix is not symmetric");
      }
      if (!(processing_[i] >= 0.0)) throw ConfigError("negative processing delay");
    }
  }

  static LatencyModel from_positions(std::vector<Point> positions, std::vector<Time> processing) {
    const std::size_t n = positions.size();
    std::vector<Time> links(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        Time d = std::hypot(positions[i].x - positions[j].x, positions[i].y - positions[j].y);
        links[i * n + j] = d;
        links[j * n + i] = d;
      }
    LatencyModel model(n, std::move(links), std::move(processing));
    model.positions_ = std::move(positions);
    return model;
  }

  std::size_t size() const { return n_; }
  Time link(NodeId u, NodeId v) const { return links_[u.value * n_ + v.value]; }
  Time processing(NodeId v) const { return processing_[v.value]; }
  std::span<const Point> positions() const { return positions_; }

  Time max_link() const {
    return links_.empty() ? 0.0 : *std::max_element(links_.begin(), links_.end());
  }
  Time max_processing() const {
    return processing_.empty() ? 0.0 : *std::max_element(processing_.begin(), processing_.end());
  }

 private:
  std::size_t n_ = 0;
  std::vector<Time> links_;
  std::vector<Time> processing_;
  std::vector<Point> positions_;
};

inline std::vector<Time> draw_processing_delays(std::size_t n, const ProcessingDelay& range,
                                                Rng& rng) {
  if (!(range.min > 0.0) || range.max < range.min)
    throw ConfigError("processing delay range must satisfy 0 < min <= max");
  std::uniform_real_distribution<Time> dist(range.min, range.max);
  std::vector<Time> out(n);
  for (auto& d : out) d = range.min == range.max ? range.min : dist(rng);
  return out;
}

/// Nodes placed uniformly at random on [0,1]^2; link delay is Euclidean
/// distance.
inline LatencyModel unit_square_latency(std::size_t n, Rng& rng, const ProcessingDelay& delay) {
  if (n < 2) throw ConfigError("unit-square network needs at least two nodes");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> pos(n);
  for (auto& p : pos) {
    p.x = unit(rng);
    p.y = unit(rng);
  }
  auto processing = draw_processing_delays(n, delay, rng);
  return LatencyModel::from_positions(std::move(pos), std::move(processing));
}

/// One-way delays derived from a round-trip ping table.
struct LatencyMatrix {
  std::vector<std::string> labels;
  std::vector<Time> one_way;  // row-major, symmetric, zero diagonal

  std::size_t size() const { return labels.size(); }
  Time at(std::size_t i, std::size_t j) const { return one_way[i * size() + j]; }
};

/// Parses the ping CSV: a header row of node labels (optionally preceded by an
/// empty corner cell), then one row per node holding its label followed by
/// n round-trip times in milliseconds. Cells are halved to one-way delays and
/// asymmetric pairs are averaged.
inline LatencyMatrix read_latency_matrix(std::istream& in, const std::string& source = "<input>") {
  auto fail = [&](const std::string& what) { throw IngestionError(source + ": " + what); };

  std::string line;
  if (!std::getline(in, line)) fail("empty latency matrix");
  auto header = csv::split(line);
  if (!header.empty() && header.front().empty()) header.erase(header.begin());
  const std::size_t n = header.size();
  if (n == 0) fail("header row has no labels");

  LatencyMatrix out;
  for (auto h : header) out.labels.emplace_back(h);
  std::vector<Time> rtt(n * n, 0.0);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    auto cells = csv::split(line);
    if (row >= n) fail("more data rows than header labels (" + std::to_string(n) + ")");
    if (cells.size() != n + 1)
      fail("row " + std::to_string(row + 1) + " has " + std::to_string(cells.size() - 1) +
           " values, expected " + std::to_string(n) + " (matrix must be square)");
    for (std::size_t col = 0; col < n; ++col) {
      auto value = csv::parse_real(cells[col + 1]);
      if (!value || std::isnan(*value) || std::isinf(*value))
        fail("unparseable cell at row " + std::to_string(row + 1) + ", column " +
             std::to_string(col + 1) + ": '" + std::string(cells[col + 1]) + "'");
      if (*value < 0.0)
        fail("negative ping at row " + std::to_string(row + 1) + ", column " +
             std::to_string(col + 1));
      rtt[row * n + col] = *value;
    }
    ++row;
  }
  if (row != n)
    fail("matrix has " + std::to_string(row) + " data rows but " + std::to_string(n) +
         " labels (matrix must be square)");

  out.one_way.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Time l = (rtt[i * n + j] / 2.0 + rtt[j * n + i] / 2.0) / 2.0;
      out.one_way[i * n + j] = l;
      out.one_way[j * n + i] = l;
    }
  return out;
}

inline LatencyMatrix load_latency_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open latency matrix " + path.string());
  return read_latency_matrix(in, path.string());
}

inline LatencyModel matrix_latency(const LatencyMatrix& matrix, const ProcessingDelay& delay,
                                   Rng& rng) {
  auto processing = draw_processing_delays(matrix.size(), delay, rng);
  return LatencyModel(matrix.size(), matrix.one_way, std::move(processing));
}

// ---------------------------------------------------------------------------
// Overlay
// ---------------------------------------------------------------------------

/// Directed connection requests between nodes. Each node owns an ordered list
/// of outgoing neighbors, bounded by its degree bound. Pinned links (e.g. an
/// attacker clique) are extra outgoing links that do not count against the
/// bound. Data flows both ways over every link, so the effective neighbor set
/// of a node is the union of its outgoing and incoming links.
class OverlayGraph {
 public:
  OverlayGraph() = default;
  OverlayGraph(std::size_t n, std::size_t degree_bound)
      : outgoing_(n), pinned_(n), bounds_(n, degree_bound) {}

  std::size_t size() const { return outgoing_.size(); }
  std::size_t degree_bound(NodeId v) const { return bounds_[v.value]; }
  void set_degree_bound(NodeId v, std::size_t d) { bounds_[v.value] = d; }

  std::span<const NodeId> outgoing(NodeId v) const { return outgoing_[v.value]; }
  std::span<const NodeId> pinned(NodeId v) const { return pinned_[v.value]; }

  void set_outgoing(NodeId v, std::vector<NodeId> targets) {
    if (targets.size() > bounds_[v.value])
      throw ConfigError("node " + std::to_string(v.value) + " exceeds its degree bound");
    auto sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("duplicate outgoing neighbor at node " + std::to_string(v.value));
    for (NodeId u : targets) {
      if (u == v) throw ConfigError("self edge at node " + std::to_string(v.value));
      if (u.value >= size()) throw ConfigError("outgoing neighbor out of range");
    }
    outgoing_[v.value] = std::move(targets);
  }

  void add_pinned(NodeId from, NodeId to) {
    if (from == to) throw ConfigError("self edge in pinned links");
    auto& list = pinned_[from.value];
    if (std::find(list.begin(), list.end(), to) == list.end()) list.push_back(to);
  }

  /// Directed edge count over outgoing and pinned links.
  std::size_t edge_count() const {
    std::size_t total = 0;
    for (std::size_t v = 0; v < size(); ++v) total += outgoing_[v].size() + pinned_[v].size();
    return total;
  }

  /// Sorted, duplicate-free effective neighbor lists. Symmetric by
  /// construction: u lists v iff v lists u.
  std::vector<std::vector<NodeId>> effective_neighbors() const {
    std::vector<std::vector<NodeId>> adj(size());
    for (std::size_t v = 0; v < size(); ++v) {
      auto add = [&](NodeId u) {
        adj[v].push_back(u);
        adj[u.value].push_back(NodeId::from(v));
      };
      for (NodeId u : outgoing_[v]) add(u);
      for (NodeId u : pinned_[v]) add(u);
    }
    for (auto& list : adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
  }

  std::vector<NodeId> incoming(NodeId v) const {
    std::vector<NodeId> in;
    for (std::size_t u = 0; u < size(); ++u) {
      auto has = [&](const std::vector<NodeId>& l) {
        return std::find(l.begin(), l.end(), v) != l.end();
      };
      if (has(outgoing_[u]) || has(pinned_[u])) in.push_back(NodeId::from(u));
    }
    return in;
  }

  void write_edges(std::ostream& os, std::size_t epoch) const {
    for (std::size_t v = 0; v < size(); ++v) {
      for (NodeId u : outgoing_[v]) csv::row(os, epoch, v, u.value);
      for (NodeId u : pinned_[v]) csv::row(os, epoch, v, u.value);
    }
  }

  friend bool operator==(const OverlayGraph&, const OverlayGraph&) = default;

 private:
  std::vector<std::vector<NodeId>> outgoing_;
  std::vector<std::vector<NodeId>> pinned_;
  std::vector<std::size_t> bounds_;
};

/// d distinct outgoing neighbors per node, drawn uniformly from `pool`
/// (every other node when pool is empty).
inline std::vector<NodeId> sample_distinct(std::size_t n, NodeId self, std::size_t d, Rng& rng,
                                           std::span<const NodeId> pool = {}) {
  std::vector<NodeId> candidates;
  if (pool.empty()) {
    candidates.reserve(n - 1);
    for (std::size_t u = 0; u < n; ++u)
      if (u != self.value) candidates.push_back(NodeId::from(u));
  } else {
    for (NodeId u : pool)
      if (u != self) candidates.push_back(u);
  }
  if (d > candidates.size()) throw ConfigError("not enough candidates for requested degree");
  // Partial Fisher-Yates; keeps draw order so the list is a uniformly random
  // ordered sample.
  for (std::size_t i = 0; i < d; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(d);
  return candidates;
}

inline OverlayGraph random_overlay(std::size_t n, std::size_t d, Rng& rng) {
  if (d >= n) throw ConfigError("degree bound d must be smaller than the node count n");
  OverlayGraph g(n, d);
  for (std::size_t v = 0; v < n; ++v)
    g.set_outgoing(NodeId::from(v), sample_distinct(n, NodeId::from(v), d, rng));
  return g;
}

/// Every ordered pair connected. The degree bound is lifted to n-1.
inline OverlayGraph complete_overlay(std::size_t n) {
  if (n < 2) throw ConfigError("complete overlay needs at least two nodes");
  OverlayGraph g(n, n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<NodeId> all;
    all.reserve(n - 1);
    for (std::size_t u = 0; u < n; ++u)
      if (u != v) all.push_back(NodeId::from(u));
    g.set_outgoing(NodeId::from(v), std::move(all));
  }
  return g;
}

}  // namespace topiary
