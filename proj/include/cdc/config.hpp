#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdc/models.hpp"
#include "cdc/training.hpp"

namespace cdc {

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | idx | cifar

  // synthetic
  int classes = 10;
  int train_samples = 5000;
  int test_samples = 1000;
  int height = 28;
  int width = 28;
  int channels = 1;
  std::uint64_t seed = 7;
  double difficulty = 0.2;

  // idx
  std::string train_images, train_labels, test_images, test_labels;

  // cifar
  std::string train_path, test_path;
};

// Aggregates every experiment knob; the on-disk format is JSON.
struct ExperimentConfig {
  DatasetSpec dataset;
  CodecConfig codec;
  int ec_base_channels = 8;
  int ac_base_channels = 16;
  int ac_blocks = 3;
  TrainPlan plan;
  std::vector<double> alpha_sweep = {8, 16, 48, 256};
  std::vector<int> mask_sweep = {4, 3, 2, 1, 0};
  int mask = 4;
  std::uint64_t budget_bytes = 0;
  int raw_bits_per_pixel = 16;
  long finetune_steps = 50;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "out";
  bool best_of_seeds = false;  // false = mean over seeds (default)

  void validate() const;

  ClassifierConfig ec_config() const;
  ClassifierConfig ac_config() const;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

}  // namespace cdc
