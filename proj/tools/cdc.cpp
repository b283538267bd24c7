#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cdc/runner.hpp"

namespace {

cdc::ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                                  const std::string& output_override) {
  cdc::ExperimentConfig cfg = cdc::ExperimentConfig::from_file(path);
  if (seed_override != 0) {
    cfg.plan.seed = seed_override;
    cfg.seeds = {seed_override};
  }
  if (!output_override.empty()) cfg.output_dir = output_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CDC edge-cloud compression experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed_override = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) {
      sub->add_option("-c,--config", config_path, "experiment config JSON")->required();
      sub->add_option("-s,--seed", seed_override, "override the plan seed and seed list");
    }
    sub->add_option("-o,--output", output_dir, "output directory override");
  };

  CLI::App* train = app.add_subcommand("train-edge", "joint AE+EC training at the edge");
  add_common(train, true);
  CLI::App* salpha = app.add_subcommand("sweep-alpha", "attenuation-rate sweep");
  add_common(salpha, true);
  CLI::App* smask = app.add_subcommand("sweep-mask", "mask-number sweep with raw baseline");
  add_common(smask, true);
  CLI::App* sim = app.add_subcommand("simulate", "full edge-cloud collaboration loop");
  add_common(sim, true);
  CLI::App* report = app.add_subcommand("report", "aggregate prior outputs into tables");
  add_common(report, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      return cdc::cmd_report(output_dir.empty() ? "out" : output_dir);
    }
    cdc::ExperimentConfig cfg = load_config(config_path, seed_override, output_dir);
    if (train->parsed()) return cdc::cmd_train_edge(cfg);
    if (salpha->parsed()) return cdc::cmd_sweep_alpha(cfg);
    if (smask->parsed()) return cdc::cmd_sweep_mask(cfg);
    if (sim->parsed()) return cdc::cmd_simulate(cfg);
  } catch (const cdc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cdc::kExitConfigError;
  } catch (const cdc::CorruptionError& e) {
    std::cerr << "corruption: " << e.what() << "\n";
    return cdc::kExitCorruption;
  } catch (const cdc::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return cdc::kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cdc::kExitFailure;
  }
  return cdc::kExitFailure;
}
