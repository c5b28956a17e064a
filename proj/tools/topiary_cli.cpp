// topiary: run, validate and list overlay experiments.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topiary/config.hpp"
#include "topiary/report.hpp"

namespace {

using topiary::Json;

// A preset name, a config file, or a run manifest (whose "config" is used).
Json load_source(const std::string& source) {
  if (!std::filesystem::exists(source)) {
    if (auto p = topiary::preset(source)) return topiary::to_json(*p);
    throw topiary::ConfigError("no config file or preset named '" + source + "'");
  }
  Json j = topiary::load_json_file(source);
  if (j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

topiary::ExperimentConfig resolve(const std::string& source, const std::vector<std::string>& overrides) {
  Json j = load_source(source);
  for (const auto& o : overrides) topiary::apply_override(j, o);
  return topiary::config_from_json(j);
}

bool report_violations(const topiary::ExperimentConfig& cfg) {
  auto problems = topiary::validate_config(cfg);
  for (const auto& p : problems) std::cerr << "validation: " << p << '\n';
  return problems.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-aware gossip overlay simulator"};
  app.require_subcommand(1);

  std::string run_source;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool serial = false;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file, manifest or preset");
  run->add_option("config", run_source, "Config file, run manifest or preset name")->required();
  run->add_option("--seed", seeds, "Seed(s); replaces the config's seed list");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--override", overrides, "Dotted key=value override, e.g. weights.w_d=1000");
  run->add_flag("--serial", serial, "Run seeds one after another");

  std::string validate_source;
  std::vector<std::string> validate_overrides;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_source, "Config file, run manifest or preset name")->required();
  validate->add_option("--override", validate_overrides, "Dotted key=value override");

  auto* presets = app.add_subcommand("presets", "Bundled experiment presets");
  auto* list = presets->add_subcommand("list", "List preset names");
  presets->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& p : topiary::kPresets) std::cout << p.name << "\t" << p.description << '\n';
      return 0;
    }
    if (*validate) {
      auto cfg = resolve(validate_source, validate_overrides);
      if (!report_violations(cfg)) return 2;
      std::cout << "ok\n";
      return 0;
    }
    auto cfg = resolve(run_source, overrides);
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!report_violations(cfg)) return 2;

    auto runs = topiary::run_experiment(cfg, !serial);
    int failed = 0;
    for (const auto& r : runs) {
      if (r.error) {
        ++failed;
        std::cerr << "seed " << r.seed << " failed: " << *r.error << '\n';
      } else {
        const auto& last = r.reports.back();
        std::cout << "seed " << r.seed << ": " << r.reports.size() << " epochs, final receive_rate "
                  << topiary::format_optional(last.receive_rate) << ", avg_delay "
                  << topiary::format_optional(last.avg_delay) << '\n';
      }
    }
    std::cout << "outputs in " << cfg.output_dir << '\n';
    return failed == 0 ? 0 : 1;
  } catch (const topiary::ConfigError& e) {
    std::cerr << "config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
