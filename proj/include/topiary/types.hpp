#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace topiary {

// Dense integer handle. Tag keeps node and topic indices from mixing.
template <typename Tag>
struct Index {
  std::uint32_t value{};

  constexpr Index() = default;
  constexpr explicit Index(std::uint32_t v) : value(v) {}
  template <typename Int>
    requires std::is_integral_v<Int>
  static constexpr Index from(Int v) {
    return Index(static_cast<std::uint32_t>(v));
  }

  constexpr auto operator<=>(const Index&) const = default;
};

using NodeId = Index<struct NodeTag>;
using TopicId = Index<struct TopicTag>;
using MessageId = std::uint32_t;

// Simulated time. Abstract units on the unit square, milliseconds for
// ingested latency matrices.
using Time = double;

inline constexpr Time kNever = std::numeric_limits<Time>::infinity();

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchedulingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Independent stream for one (seed, purpose, a, b) tuple. Used to give each
// node its own exploration stream so per-node decisions do not depend on the
// order nodes are processed in.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t purpose,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t kSubscriptions = 1;
inline constexpr std::uint64_t kLatency = 2;
inline constexpr std::uint64_t kOverlay = 3;
inline constexpr std::uint64_t kPublishers = 4;
inline constexpr std::uint64_t kExplore = 5;
inline constexpr std::uint64_t kAttackers = 6;
}  // namespace stream

}  // namespace topiary

template <typename Tag>
struct std::hash<topiary::Index<Tag>> {
  std::size_t operator()(topiary::Index<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
