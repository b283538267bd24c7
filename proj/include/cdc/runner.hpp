#pragma once

#include <string>
#include <utility>

#include "cdc/config.hpp"
#include "cdc/data.hpp"
#include "cdc/protocol.hpp"

namespace cdc {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitNonConvergence = 3,
  kExitCorruption = 4,
};

std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetSpec& spec);

struct PipelineResult {
  bool ok = false;
  bool converged = false;
  double accuracy = 0;
  std::string error;
};

// Edge training (optionally unguided) at mask m, deterministic upload, fresh
// AC trained on restored data, evaluated on raw test data.
PipelineResult run_pipeline(const LabeledDataset& train, const LabeledDataset& test,
                            const CodecConfig& codec, const ClassifierConfig& ec_cfg,
                            const ClassifierConfig& ac_cfg, TrainPlan plan, int m, bool guidance);

// Raw baseline: AC trained directly on uncompressed data.
double run_ac_raw(const LabeledDataset& train, const LabeledDataset& test,
                  const ClassifierConfig& ac_cfg, const TrainPlan& plan);

int cmd_train_edge(const ExperimentConfig& cfg);
int cmd_sweep_alpha(const ExperimentConfig& cfg);
int cmd_sweep_mask(const ExperimentConfig& cfg);
int cmd_simulate(const ExperimentConfig& cfg);
int cmd_report(const std::string& output_dir);

}  // namespace cdc
