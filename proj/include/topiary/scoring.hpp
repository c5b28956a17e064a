#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "topiary/gossip.hpp"
#include "topiary/types.hpp"

namespace topiary {

enum class CoverageForm {
  miss_fraction,       // 1 - delivered/expected; higher is worse
  delivered_fraction,  // delivered/expected, kept for comparison runs
};

/// Weights of the subset cost and the retention/exploration split.
struct ScoreWeights {
  double coverage = 1.0;  // w_c
  double delay = 3000.0;  // w_d
  double wastage = 0.0;   // w_w
  double eta = 2.0;       // underperformance threshold, > 1
  std::size_t keep_count = 4;
  std::size_t switch_count = 2;
  CoverageForm coverage_form = CoverageForm::miss_fraction;

  /// Empty when valid; otherwise one message per broken rule.
  std::vector<std::string> violations(std::size_t degree_bound) const {
    std::vector<std::string> out;
    if (coverage < 0 || delay < 0 || wastage < 0) out.emplace_back("weights must be nonnegative");
    if (coverage == 0 && delay == 0 && wastage == 0)
      out.emplace_back("at least one weight must be positive");
    if (!(eta > 1.0)) out.emplace_back("eta must exceed 1");
    if (keep_count + switch_count != degree_bound)
      out.emplace_back("keep_count + switch_count must equal the degree bound d");
    return out;
  }
};

struct SubsetScore {
  std::vector<NodeId> subset;  // sorted
  double delay = 0;            // F_d
  double coverage = 0;         // F_c
  double wastage = 0;          // F_w
  double total = 0;            // S, lower is better
};

/// Interest lookup for one node.
class InterestSet {
 public:
  InterestSet() = default;
  explicit InterestSet(std::span<const TopicId> topics) : topics_(topics.begin(), topics.end()) {
    std::sort(topics_.begin(), topics_.end());
    topics_.erase(std::unique(topics_.begin(), topics_.end()), topics_.end());
    std::uint32_t max_id = topics_.empty() ? 0 : topics_.back().value + 1;
    member_.assign(max_id, 0);
    for (TopicId t : topics_) member_[t.value] = 1;
  }

  bool contains(TopicId t) const { return t.value < member_.size() && member_[t.value] != 0; }
  std::span<const TopicId> topics() const { return topics_; }
  std::size_t size() const { return topics_.size(); }

 private:
  std::vector<TopicId> topics_;
  std::vector<std::uint8_t> member_;
};

using SubsetMask = std::uint32_t;

/// Normalized delivery times from one observation log, restricted to a fixed
/// list of candidate neighbors so subsets can be scored as bitmasks.
class ScoringTable {
 public:
  static constexpr std::size_t kMaxCandidates = 32;

  ScoringTable(const ObservationLog& log, std::span<const NodeId> candidates,
               const InterestSet& interests)
      : candidates_(candidates.begin(), candidates.end()) {
    if (candidates_.size() > kMaxCandidates)
      throw ConfigError("too many scoring candidates");
    const std::size_t k = candidates_.size();
    Time max_normalized = 0;
    rows_.reserve(log.size());
    times_.reserve(log.size() * k);
    for (const auto& rec : log.records()) {
      rows_.push_back(Row{rec.topic, interests.contains(rec.topic)});
      for (NodeId c : candidates_) {
        Time t = kNever;
        for (const auto& e : rec.senders)
          if (e.neighbor == c) {
            t = e.time - rec.first;
            break;
          }
        times_.push_back(t);
      }
      for (const auto& e : rec.senders) max_normalized = std::max(max_normalized, e.time - rec.first);
    }
    // Worse than any delivering subset, always finite.
    sentinel_ = max_normalized > 0 ? 2.0 * max_normalized : 1.0;
  }

  std::span<const NodeId> candidates() const { return candidates_; }
  std::size_t messages() const { return rows_.size(); }
  double sentinel() const { return sentinel_; }

  SubsetMask full_mask() const {
    return candidates_.size() == 32 ? ~SubsetMask{0}
                                    : static_cast<SubsetMask>((1ull << candidates_.size()) - 1);
  }

  SubsetMask mask_of(std::span<const NodeId> subset) const {
    SubsetMask mask = 0;
    for (NodeId u : subset) {
      auto it = std::find(candidates_.begin(), candidates_.end(), u);
      if (it == candidates_.end())
        throw std::invalid_argument("subset member " + std::to_string(u.value) +
                                    " is not a scoring candidate");
      mask |= SubsetMask{1} << (it - candidates_.begin());
    }
    return mask;
  }

  std::vector<NodeId> members(SubsetMask mask) const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < candidates_.size(); ++i)
      if (mask & (SubsetMask{1} << i)) out.push_back(candidates_[i]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Earliest normalized delivery of message row `r` by any subset member.
  Time best_time(std::size_t r, SubsetMask mask) const {
    const Time* row = times_.data() + r * candidates_.size();
    Time best = kNever;
    for (SubsetMask m = mask; m != 0; m &= m - 1) best = std::min(best, row[std::countr_zero(m)]);
    return best;
  }

  /// Mean best normalized delay over interested messages the subset
  /// delivered; sentinel when it delivered none. Optionally one topic only.
  double delay(SubsetMask mask, std::optional<TopicId> only = std::nullopt) const {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (!rows_[r].interested || (only && rows_[r].topic != *only)) continue;
      Time t = best_time(r, mask);
      if (t == kNever) continue;
      sum += t;
      ++count;
    }
    return count == 0 ? sentinel_ : sum / static_cast<double>(count);
  }

  std::size_t delivered(SubsetMask mask, std::optional<TopicId> only = std::nullopt) const {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (!rows_[r].interested || (only && rows_[r].topic != *only)) continue;
      if (best_time(r, mask) != kNever) ++count;
    }
    return count;
  }

  std::size_t wasted(SubsetMask mask) const {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows_.size(); ++r)
      if (!rows_[r].interested && best_time(r, mask) != kNever) ++count;
    return count;
  }

 private:
  struct Row {
    TopicId topic;
    bool interested;
  };
  std::vector<NodeId> candidates_;
  std::vector<Row> rows_;
  std::vector<Time> times_;  // rows_ x candidates_
  double sentinel_ = 1.0;
};

inline double coverage_from_counts(std::size_t delivered, std::size_t expected, CoverageForm form) {
  if (expected == 0) throw ConfigError("expected message count for subscribed topics is zero");
  double frac = std::clamp(static_cast<double>(delivered) / static_cast<double>(expected), 0.0, 1.0);
  return form == CoverageForm::miss_fraction ? 1.0 - frac : frac;
}

inline std::size_t expected_total(const InterestSet& interests,
                                  std::span<const std::size_t> published_counts) {
  std::size_t total = 0;
  for (TopicId t : interests.topics())
    if (t.value < published_counts.size()) total += published_counts[t.value];
  return total;
}

inline double combine(const ScoreWeights& w, double coverage, double delay, double wastage) {
  return w.coverage * coverage + w.delay * delay + w.wastage * wastage;
}

inline SubsetScore score_mask(const ScoringTable& table, SubsetMask mask,
                              const InterestSet& interests,
                              std::span<const std::size_t> published_counts,
                              const ScoreWeights& w) {
  SubsetScore s;
  s.subset = table.members(mask);
  s.delay = table.delay(mask);
  s.coverage = coverage_from_counts(table.delivered(mask), expected_total(interests, published_counts),
                                    w.coverage_form);
  s.wastage = static_cast<double>(table.wasted(mask));
  s.total = combine(w, s.coverage, s.delay, s.wastage);
  return s;
}

// Single-subset entry points. Each builds a table over the subset alone; the
// normalization still uses every neighbor recorded in the log.

inline double topic_delay_score(std::span<const NodeId> subset, const ObservationLog& log,
                                const InterestSet& interests) {
  ScoringTable table(log, subset, interests);
  return table.delay(table.full_mask());
}

inline double topic_coverage_score(std::span<const NodeId> subset, const ObservationLog& log,
                                   const InterestSet& interests,
                                   std::span<const std::size_t> published_counts,
                                   CoverageForm form = CoverageForm::miss_fraction) {
  ScoringTable table(log, subset, interests);
  return coverage_from_counts(table.delivered(table.full_mask()),
                              expected_total(interests, published_counts), form);
}

inline double bandwidth_wastage_score(std::span<const NodeId> subset, const ObservationLog& log,
                                      const InterestSet& interests) {
  ScoringTable table(log, subset, interests);
  return static_cast<double>(table.wasted(table.full_mask()));
}

inline SubsetScore overall_score(std::span<const NodeId> subset, const ObservationLog& log,
                                 const InterestSet& interests,
                                 std::span<const std::size_t> published_counts,
                                 const ScoreWeights& w) {
  ScoringTable table(log, subset, interests);
  return score_mask(table, table.full_mask(), interests, published_counts, w);
}

struct SelectionResult {
  SubsetScore best;
  SubsetMask best_mask = 0;
  std::size_t subsets_evaluated = 0;
  std::vector<SubsetScore> evaluated;  // in enumeration order, when requested
};

/// Scores every keep_count-subset of the outgoing neighbors and keeps the
/// cheapest. Subsets are enumerated in lexicographic order of sorted member
/// ids and only a strictly lower total replaces the incumbent, so ties go to
/// the lexicographically smallest subset.
inline SelectionResult select_best_subset(std::span<const NodeId> outgoing,
                                          const ObservationLog& log, const InterestSet& interests,
                                          std::span<const std::size_t> published_counts,
                                          const ScoreWeights& w, bool keep_all_scores = false) {
  std::vector<NodeId> sorted(outgoing.begin(), outgoing.end());
  std::sort(sorted.begin(), sorted.end());
  ScoringTable table(log, sorted, interests);
  const std::size_t n = sorted.size();
  const std::size_t k = std::min(w.keep_count, n);

  SelectionResult result;
  bool have = false;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    SubsetMask mask = 0;
    for (std::size_t i : idx) mask |= SubsetMask{1} << i;
    SubsetScore s = score_mask(table, mask, interests, published_counts, w);
    ++result.subsets_evaluated;
    if (!have || s.total < result.best.total) {
      result.best = s;
      result.best_mask = mask;
      have = true;
    }
    if (keep_all_scores) result.evaluated.push_back(std::move(s));
    // Next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return result;
}

}  // namespace topiary
