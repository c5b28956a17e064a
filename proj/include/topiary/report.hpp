#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topiary/config.hpp"
#include "topiary/csv.hpp"
#include "topiary/simulation.hpp"

namespace topiary {

namespace fs = std::filesystem;

inline std::string format_optional(const std::optional<double>& v) {
  return v ? csv::format_real(*v) : std::string("NA");
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

inline void write_metrics_csv(std::ostream& os, std::span<const EpochReport> reports) {
  os << "epoch,receive_rate,avg_delay,avg_neighbor_score,messages,deliveries\n";
  for (const auto& r : reports)
    csv::row(os, r.epoch, format_optional(r.receive_rate), format_optional(r.avg_delay),
             format_optional(r.avg_neighbor_score), r.messages, r.deliveries);
}

inline void write_topic_metrics_csv(std::ostream& os, std::span<const EpochReport> reports) {
  os << "epoch,topic,receive_rate,avg_delay\n";
  for (const auto& r : reports)
    for (const auto& t : r.topics)
      csv::row(os, r.epoch, t.topic.value, format_optional(t.receive_rate), format_optional(t.avg_delay));
}

inline void write_score_dist_csv(std::ostream& os, std::span<const EpochReport> reports) {
  os << "epoch,rank,score\n";
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.score_distribution.size(); ++k)
      csv::row(os, r.epoch, k, csv::format_real(r.score_distribution[k]));
}

/// metrics.csv, topic_metrics.csv and score_dist.csv under `dir`.
inline void write_reports(std::span<const EpochReport> reports, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto m = open_output(dir / "metrics.csv");
  write_metrics_csv(m, reports);
  auto t = open_output(dir / "topic_metrics.csv");
  write_topic_metrics_csv(t, reports);
  auto s = open_output(dir / "score_dist.csv");
  write_score_dist_csv(s, reports);
  if (!m || !t || !s) throw IoError("write failed under " + dir.string());
}

inline std::string overlay_file_name(std::size_t epoch) {
  return "overlay_epoch_" + std::to_string(epoch) + ".csv";
}

/// Replayable description of one seed's run.
inline Json run_manifest(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig single = cfg;
  single.seeds = {seed};
  Json j;
  j["config"] = to_json(single);
  j["seed"] = seed;
  j["config_hash"] = config_hash(single);
  return j;
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpochReport> reports;
  std::vector<AttackMetrics> attack;  // one per epoch when an attack is configured
  std::optional<std::string> error;   // stage-named diagnostic when the run aborted
};

/// Runs every epoch for one seed. With an output directory, all per-seed
/// files are written there as the run proceeds.
inline SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::optional<fs::path>& dir = std::nullopt) {
  SeedRun run;
  run.seed = seed;
  try {
    std::optional<std::ofstream> attack_os, scores_os, explore_os;
    if (dir) {
      fs::create_directories(*dir);
      auto manifest = open_output(*dir / "manifest.json");
      manifest << run_manifest(cfg, seed).dump(2) << '\n';
      if (cfg.attack.kind != AttackKind::none) {
        attack_os = open_output(*dir / "attack_metrics.csv");
        *attack_os << "epoch,victim_topic_coverage,victim_topic_delay,attacker_outgoing_fraction,"
                      "max_attacker_share\n";
      }
      if (cfg.outputs.score_tables) {
        scores_os = open_output(*dir / "scores.csv");
        *scores_os << "epoch,node,subset,delay,coverage,wastage,total,retained\n";
      }
      if (cfg.outputs.exploration) {
        explore_os = open_output(*dir / "exploration.csv");
        *explore_os << "epoch,node,sigma_plus,replaced,added\n";
      }
      if (cfg.outputs.traces) fs::create_directories(*dir / "traces");
    }

    Simulation sim(cfg, seed);
    if (dir && cfg.outputs.subscriptions) {
      auto os = open_output(*dir / "subscriptions.csv");
      sim.subscriptions().write_csv(os);
    }
    auto ids = [](const auto& xs) {
      return csv::join(xs, [](auto x) { return std::to_string(x.value); });
    };
    for (std::size_t e = 0; e < cfg.num_epochs; ++e) {
      EpochOutcome out = sim.step();
      if (out.attack) run.attack.push_back(*out.attack);
      if (dir) {
        StageError::wrap("epoch " + std::to_string(e) + " write", [&] {
          if (cfg.outputs.overlays) {
            auto os = open_output(*dir / overlay_file_name(e));
            os << "epoch,src,dst\n";
            out.overlay.write_edges(os, e);
          }
          if (attack_os && out.attack)
            csv::row(*attack_os, e, format_optional(out.attack->victim_coverage),
                     format_optional(out.attack->victim_delay),
                     csv::format_real(out.attack->attacker_fraction),
                     csv::format_real(out.attack->max_attacker_share));
          if (scores_os)
            for (const auto& s : out.scores)
              csv::row(*scores_os, e, s.node.value, ids(s.score.subset), csv::format_real(s.score.delay),
                       csv::format_real(s.score.coverage), csv::format_real(s.score.wastage),
                       csv::format_real(s.score.total), s.retained ? 1 : 0);
          if (explore_os)
            for (const auto& x : out.exploration)
              csv::row(*explore_os, e, x.node.value, ids(x.sigma_plus), ids(x.replaced), ids(x.added));
          if (out.trace) {
            auto os = open_output(*dir / "traces" / ("trace_epoch_" + std::to_string(e) + ".csv"));
            write_trace_csv(os, *out.trace);
          }
        });
      }
      run.reports.push_back(std::move(out.report));
    }
    if (dir) StageError::wrap("write-reports", [&] { write_reports(run.reports, *dir); });
  } catch (const StageError& e) {
    run.error = e.what();
  } catch (const std::exception& e) {
    run.error = std::string("setup: ") + e.what();
  }
  return run;
}

struct SummaryRow {
  std::size_t epoch;
  std::size_t seeds;
  std::optional<double> rate_mean, rate_std, delay_mean, delay_std, score_mean, score_std;
};

/// Mean and sample standard deviation across the successful seeds, per epoch.
/// A measure that is undefined for a seed is left out of that epoch's figures.
inline std::vector<SummaryRow> summarize(std::span<const SeedRun> runs) {
  std::size_t epochs = 0;
  for (const auto& r : runs)
    if (!r.error) epochs = std::max(epochs, r.reports.size());
  auto stats = [](const std::vector<double>& xs, std::optional<double>& mean, std::optional<double>& sd) {
    if (xs.empty()) return;
    double m = 0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    mean = m;
    if (xs.size() < 2) return;
    double ss = 0;
    for (double x : xs) ss += (x - m) * (x - m);
    sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  std::vector<SummaryRow> rows;
  for (std::size_t e = 0; e < epochs; ++e) {
    SummaryRow row{e, 0, {}, {}, {}, {}, {}, {}};
    std::vector<double> rate, delay, score;
    for (const auto& r : runs) {
      if (r.error || e >= r.reports.size()) continue;
      ++row.seeds;
      const auto& rep = r.reports[e];
      if (rep.receive_rate) rate.push_back(*rep.receive_rate);
      if (rep.avg_delay) delay.push_back(*rep.avg_delay);
      if (rep.avg_neighbor_score) score.push_back(*rep.avg_neighbor_score);
    }
    stats(rate, row.rate_mean, row.rate_std);
    stats(delay, row.delay_mean, row.delay_std);
    stats(score, row.score_mean, row.score_std);
    rows.push_back(row);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << "epoch,seeds,receive_rate_mean,receive_rate_std,avg_delay_mean,avg_delay_std,"
        "avg_neighbor_score_mean,avg_neighbor_score_std\n";
  for (const auto& r : rows)
    csv::row(os, r.epoch, r.seeds, format_optional(r.rate_mean), format_optional(r.rate_std),
             format_optional(r.delay_mean), format_optional(r.delay_std),
             format_optional(r.score_mean), format_optional(r.score_std));
}

inline fs::path seed_directory(const fs::path& root, std::uint64_t seed) {
  return root / ("seed_" + std::to_string(seed));
}

/// All seeds, concurrently, each into <output_dir>/seed_<S>/, then
/// summary.csv at the root. A seed that fails does not stop the others.
inline std::vector<SeedRun> run_experiment(const ExperimentConfig& cfg, bool parallel = true) {
  const fs::path root = cfg.output_dir;
  std::vector<SeedRun> runs;
  if (parallel && cfg.seeds.size() > 1) {
    std::vector<std::future<SeedRun>> jobs;
    for (auto seed : cfg.seeds)
      jobs.push_back(std::async(std::launch::async, [&cfg, &root, seed] {
        return run_seed(cfg, seed, seed_directory(root, seed));
      }));
    for (auto& j : jobs) runs.push_back(j.get());
  } else {
    for (auto seed : cfg.seeds) runs.push_back(run_seed(cfg, seed, seed_directory(root, seed)));
  }
  fs::create_directories(root);
  auto os = open_output(root / "summary.csv");
  write_summary_csv(os, summarize(runs));
  return runs;
}

}  // namespace topiary
