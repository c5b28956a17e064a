#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "topiary/adversary.hpp"
#include "topiary/net_model.hpp"
#include "topiary/protocols.hpp"
#include "topiary/scoring.hpp"

namespace topiary {

enum class NetworkKind { unit_square, matrix };

struct NetworkConfig {
  NetworkKind kind = NetworkKind::unit_square;
  std::size_t nodes = 1000;  // unit-square only; matrix size comes from the file
  std::string matrix_path;
  ProcessingDelay processing_ms{0.5, 1.5};
  // Milliseconds per model time unit. Unit-square distances are read as
  // seconds, ingested matrices are already in milliseconds.
  std::optional<double> ms_per_unit;

  double time_unit_ms() const {
    return ms_per_unit.value_or(kind == NetworkKind::unit_square ? 1000.0 : 1.0);
  }
  ProcessingDelay processing_units() const {
    return {processing_ms.min / time_unit_ms(), processing_ms.max / time_unit_ms()};
  }
};

struct OutputOptions {
  bool overlays = true;
  bool subscriptions = true;
  bool score_tables = false;
  bool exploration = false;
  bool traces = false;
};

struct ExperimentConfig {
  std::string name = "custom";
  NetworkConfig network;
  std::size_t degree = 6;
  std::size_t switch_count = 2;
  std::size_t num_topics = 100;
  double interest_rate = 0.4;
  std::size_t messages_per_epoch = 1000;
  std::size_t num_epochs = 150;
  int initial_ttl = 1;
  std::optional<Time> round_interval;
  ScoreWeights weights;
  ProtocolPolicy policy;
  AttackConfig attack;
  std::string rewiring = "synchronous";
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  OutputOptions outputs;

  ScoreWeights effective_weights() const {
    ScoreWeights w = weights;
    w.switch_count = switch_count;
    w.keep_count = degree >= switch_count ? degree - switch_count : 0;
    return w;
  }
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline std::string_view coverage_form_name(CoverageForm f) {
  return f == CoverageForm::miss_fraction ? "miss-fraction" : "delivered-fraction";
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  Json net;
  net["kind"] = c.network.kind == NetworkKind::unit_square ? "unit-square" : "matrix";
  net["nodes"] = c.network.nodes;
  net["matrix_path"] = c.network.matrix_path;
  net["processing_delay_ms"] = {{"min", c.network.processing_ms.min},
                                {"max", c.network.processing_ms.max}};
  net["ms_per_unit"] = c.network.time_unit_ms();
  j["network"] = net;
  j["degree"] = c.degree;
  j["switch_count"] = c.switch_count;
  j["topics"] = c.num_topics;
  j["interest_rate"] = c.interest_rate;
  j["messages_per_epoch"] = c.messages_per_epoch;
  j["epochs"] = c.num_epochs;
  j["initial_ttl"] = c.initial_ttl;
  j["round_interval"] = c.round_interval ? Json(*c.round_interval) : Json(nullptr);
  j["weights"] = {{"w_c", c.weights.coverage},
                  {"w_d", c.weights.delay},
                  {"w_w", c.weights.wastage},
                  {"eta", c.weights.eta},
                  {"coverage_form", coverage_form_name(c.weights.coverage_form)}};
  j["policy"] = {{"kind", policy_name(c.policy.kind)}, {"scribe_groups", c.policy.scribe_groups}};
  j["attack"] = {{"kind", attack_name(c.attack.kind)},
                 {"attackers", c.attack.attacker_count},
                 {"victim_topic", c.attack.victim_topic.value},
                 {"eclipse_withhold", c.attack.eclipse_withhold}};
  j["rewiring"] = c.rewiring;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["outputs"] = {{"overlays", c.outputs.overlays},
                  {"subscriptions", c.outputs.subscriptions},
                  {"score_tables", c.outputs.score_tables},
                  {"exploration", c.outputs.exploration},
                  {"traces", c.outputs.traces}};
  return j;
}

namespace detail {

inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected. A top-level
/// "manifest" block (written next to run outputs) is ignored.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c;
  check_keys(j,
             {"name", "network", "degree", "switch_count", "topics", "interest_rate",
              "messages_per_epoch", "epochs", "initial_ttl", "round_interval", "weights", "policy",
              "attack", "rewiring", "seeds", "output_dir", "outputs", "manifest"},
             "");
  read(j, "name", c.name, "");
  if (j.contains("network")) {
    const Json& n = j["network"];
    check_keys(n, {"kind", "nodes", "matrix_path", "processing_delay_ms", "ms_per_unit"}, "network");
    std::string kind = "unit-square";
    read(n, "kind", kind, "network.");
    if (kind == "unit-square") c.network.kind = NetworkKind::unit_square;
    else if (kind == "matrix") c.network.kind = NetworkKind::matrix;
    else throw ConfigError("network.kind must be 'unit-square' or 'matrix', got '" + kind + "'");
    read(n, "nodes", c.network.nodes, "network.");
    read(n, "matrix_path", c.network.matrix_path, "network.");
    if (n.contains("processing_delay_ms")) {
      const Json& p = n["processing_delay_ms"];
      check_keys(p, {"min", "max"}, "network.processing_delay_ms");
      read(p, "min", c.network.processing_ms.min, "network.processing_delay_ms.");
      read(p, "max", c.network.processing_ms.max, "network.processing_delay_ms.");
    }
    if (n.contains("ms_per_unit") && !n["ms_per_unit"].is_null()) {
      double v = 0;
      read(n, "ms_per_unit", v, "network.");
      c.network.ms_per_unit = v;
    }
  }
  read(j, "degree", c.degree, "");
  read(j, "switch_count", c.switch_count, "");
  read(j, "topics", c.num_topics, "");
  read(j, "interest_rate", c.interest_rate, "");
  read(j, "messages_per_epoch", c.messages_per_epoch, "");
  read(j, "epochs", c.num_epochs, "");
  read(j, "initial_ttl", c.initial_ttl, "");
  if (j.contains("round_interval") && !j["round_interval"].is_null()) {
    Time v = 0;
    read(j, "round_interval", v, "");
    c.round_interval = v;
  }
  if (j.contains("weights")) {
    const Json& w = j["weights"];
    check_keys(w, {"w_c", "w_d", "w_w", "eta", "coverage_form"}, "weights");
    read(w, "w_c", c.weights.coverage, "weights.");
    read(w, "w_d", c.weights.delay, "weights.");
    read(w, "w_w", c.weights.wastage, "weights.");
    read(w, "eta", c.weights.eta, "weights.");
    std::string form = "miss-fraction";
    read(w, "coverage_form", form, "weights.");
    if (form == "miss-fraction") c.weights.coverage_form = CoverageForm::miss_fraction;
    else if (form == "delivered-fraction") c.weights.coverage_form = CoverageForm::delivered_fraction;
    else throw ConfigError("weights.coverage_form must be 'miss-fraction' or 'delivered-fraction'");
  }
  if (j.contains("policy")) {
    const Json& p = j["policy"];
    check_keys(p, {"kind", "scribe_groups"}, "policy");
    std::string kind = "topiary";
    read(p, "kind", kind, "policy.");
    auto k = parse_policy(kind);
    if (!k) throw ConfigError("unknown policy.kind '" + kind + "'");
    c.policy.kind = *k;
    read(p, "scribe_groups", c.policy.scribe_groups, "policy.");
  }
  if (j.contains("attack")) {
    const Json& a = j["attack"];
    check_keys(a, {"kind", "attackers", "victim_topic", "eclipse_withhold"}, "attack");
    std::string kind = "none";
    read(a, "kind", kind, "attack.");
    auto k = parse_attack(kind);
    if (!k) throw ConfigError("unknown attack.kind '" + kind + "'");
    c.attack.kind = *k;
    read(a, "attackers", c.attack.attacker_count, "attack.");
    std::uint32_t victim = 0;
    read(a, "victim_topic", victim, "attack.");
    c.attack.victim_topic = TopicId(victim);
    read(a, "eclipse_withhold", c.attack.eclipse_withhold, "attack.");
  }
  read(j, "rewiring", c.rewiring, "");
  read(j, "seeds", c.seeds, "");
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("outputs")) {
    const Json& o = j["outputs"];
    check_keys(o, {"overlays", "subscriptions", "score_tables", "exploration", "traces"}, "outputs");
    read(o, "overlays", c.outputs.overlays, "outputs.");
    read(o, "subscriptions", c.outputs.subscriptions, "outputs.");
    read(o, "score_tables", c.outputs.score_tables, "outputs.");
    read(o, "exploration", c.outputs.exploration, "outputs.");
    read(o, "traces", c.outputs.traces, "outputs.");
  }
  return c;
}

inline Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses, otherwise
/// as a plain string.
inline void apply_override(Json& j, std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  std::string key(assignment.substr(0, eq));
  std::string raw(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Node count for the configured network; reads the matrix header when the
/// network is file-backed. Empty when the file cannot be read.
inline std::optional<std::size_t> network_size(const NetworkConfig& net) {
  if (net.kind == NetworkKind::unit_square) return net.nodes;
  std::ifstream in(net.matrix_path);
  std::string header;
  if (!in || !std::getline(in, header)) return std::nullopt;
  auto cells = csv::split(header);
  if (!cells.empty() && cells.front().empty()) cells.erase(cells.begin());
  return cells.size();
}

/// Every broken cross-field rule, as readable messages. Never mutates.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> v;
  std::optional<std::size_t> n;
  if (c.network.kind == NetworkKind::matrix) {
    if (c.network.matrix_path.empty()) {
      v.emplace_back("network.matrix_path is required for matrix networks");
    } else if (!std::filesystem::exists(c.network.matrix_path)) {
      v.emplace_back("latency matrix file not found: " + c.network.matrix_path);
    } else {
      n = network_size(c.network);
      if (!n || *n < 2) v.emplace_back("latency matrix " + c.network.matrix_path + " has fewer than 2 nodes");
    }
  } else {
    n = c.network.nodes;
    if (*n < 2) v.emplace_back("network.nodes must be at least 2");
  }
  if (!(c.network.processing_ms.min > 0))
    v.emplace_back("network.processing_delay_ms.min must be positive");
  if (c.network.processing_ms.max < c.network.processing_ms.min)
    v.emplace_back("network.processing_delay_ms.max must be >= min");
  if (!(c.network.time_unit_ms() > 0)) v.emplace_back("network.ms_per_unit must be positive");

  if (c.degree == 0) v.emplace_back("degree must be at least 1");
  if (n && c.degree >= *n) v.emplace_back("degree d must be smaller than the node count n");
  if (c.switch_count > c.degree) v.emplace_back("switch_count must not exceed degree");
  if (c.num_topics == 0) v.emplace_back("topics must be at least 1");
  if (!(c.interest_rate > 0 && c.interest_rate <= 1)) {
    v.emplace_back("interest_rate must lie in (0, 1]");
  } else if (n) {
    if (c.interest_rate * static_cast<double>(*n) < 1.0)
      v.emplace_back("interest_rate too low: fewer than one expected subscriber per topic");
    if (c.interest_rate * static_cast<double>(c.num_topics) < 1.0)
      v.emplace_back("interest_rate too low: fewer than one expected topic per node");
  }
  if (c.messages_per_epoch == 0) v.emplace_back("messages_per_epoch must be at least 1");
  if (c.num_epochs == 0) v.emplace_back("epochs must be at least 1");
  if (c.initial_ttl < 0) v.emplace_back("initial_ttl must be nonnegative");
  if (c.round_interval && !(*c.round_interval > 0)) v.emplace_back("round_interval must be positive");

  if (c.policy.kind == PolicyKind::topiary)
    for (auto& msg : c.effective_weights().violations(c.degree)) v.push_back(msg);
  else if (!(c.weights.eta > 1.0))
    v.emplace_back("eta must exceed 1");
  if (c.policy.kind == PolicyKind::scribe_random_groups && c.policy.scribe_groups == 0)
    v.emplace_back("policy.scribe_groups must be at least 1");

  if (c.attack.kind != AttackKind::none) {
    if (n && c.attack.attacker_count >= *n) v.emplace_back("attack.attackers must be below the node count");
    if (c.attack.victim_topic.value >= c.num_topics)
      v.emplace_back("attack.victim_topic does not exist");
    if (c.attack.kind == AttackKind::eclipse && n && c.attack.attacker_count + c.degree + 1 > *n)
      v.emplace_back("eclipse needs at least d + 1 honest nodes");
    if (c.attack.kind == AttackKind::eclipse && c.policy.kind == PolicyKind::gossipsub_like)
      v.emplace_back("eclipse is not supported with per-topic gossipsub-like meshes");
  }
  if (c.rewiring == "asynchronous") v.emplace_back("asynchronous rewiring is not implemented");
  else if (c.rewiring != "synchronous") v.emplace_back("rewiring must be 'synchronous'");
  if (c.seeds.empty()) v.emplace_back("seeds must list at least one seed");
  return v;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct Preset {
  std::string_view name;
  std::string_view description;
};

inline constexpr Preset kPresets[] = {
    {"unit-square-1000", "1000 nodes on the unit square, d=6, 100 topics at 40%, 150 epochs"},
    {"wondernetwork-246", "246 cities from a ping matrix, d=5, 100 topics at 40%, 150 epochs"},
    {"topic-attack-300", "unit-square-1000 with 300 attackers withholding topic 0"},
    {"eclipse-300", "unit-square-1000 with a 300-node honest-forwarding attacker clique"},
    {"desk-200", "200 nodes, d=6, 20 topics at 40%, 200 messages per epoch, 60 epochs"},
};

inline std::optional<ExperimentConfig> preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  if (name == "unit-square-1000") return c;
  if (name == "wondernetwork-246") {
    c.network.kind = NetworkKind::matrix;
    c.network.matrix_path = "data/wondernetwork_246.csv";
    c.degree = 5;
    c.switch_count = 2;
    return c;
  }
  if (name == "topic-attack-300") {
    c.attack = AttackConfig{AttackKind::topic_withhold, 300, TopicId(0), false};
    return c;
  }
  if (name == "eclipse-300") {
    c.attack = AttackConfig{AttackKind::eclipse, 300, TopicId(0), false};
    return c;
  }
  if (name == "desk-200") {
    c.network.nodes = 200;
    c.num_topics = 20;
    c.messages_per_epoch = 200;
    c.num_epochs = 60;
    return c;
  }
  return std::nullopt;
}

/// 64-bit FNV-1a over the canonical JSON dump; stands in for a timestamp in
/// run manifests so identical configs give identical output trees.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace topiary
