#include "cdc/config.hpp"

#include <fstream>

#include <json.hpp>

namespace cdc {

using nlohmann::json;

void ExperimentConfig::validate() const {
  codec.validate();
  plan.validate();
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  if (mask < 0 || mask > 4) throw ConfigError("mask must be in {0..4}");
  for (int m : mask_sweep) {
    if (m < 0 || m > 4) throw ConfigError("mask sweep entries must be in {0..4}");
  }
  for (double a : alpha_sweep) {
    if (a < 1.0) throw ConfigError("alpha sweep entries must be >= 1");
  }
  if (dataset.kind != "synthetic" && dataset.kind != "idx" && dataset.kind != "cifar") {
    throw ConfigError("unknown dataset kind: " + dataset.kind);
  }
}

ClassifierConfig ExperimentConfig::ec_config() const {
  ClassifierConfig c;
  c.tier = ClassifierConfig::Tier::Elementary;
  c.classes = dataset.classes;
  c.height = codec.height;
  c.width = codec.width;
  c.channels = codec.channels;
  c.base_channels = ec_base_channels;
  return c;
}

ClassifierConfig ExperimentConfig::ac_config() const {
  ClassifierConfig c;
  c.tier = ClassifierConfig::Tier::Advanced;
  c.classes = dataset.classes;
  c.height = codec.height;
  c.width = codec.width;
  c.channels = codec.channels;
  c.base_channels = ac_base_channels;
  c.blocks = ac_blocks;
  return c;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = {{"kind", dataset.kind},
                  {"classes", dataset.classes},
                  {"train_samples", dataset.train_samples},
                  {"test_samples", dataset.test_samples},
                  {"height", dataset.height},
                  {"width", dataset.width},
                  {"channels", dataset.channels},
                  {"seed", dataset.seed},
                  {"difficulty", dataset.difficulty},
                  {"train_images", dataset.train_images},
                  {"train_labels", dataset.train_labels},
                  {"test_images", dataset.test_images},
                  {"test_labels", dataset.test_labels},
                  {"train_path", dataset.train_path},
                  {"test_path", dataset.test_path}};
  j["codec"] = {{"height", codec.height},
                {"width", codec.width},
                {"channels", codec.channels},
                {"downsample", codec.downsample},
                {"latent_channels", codec.latent_channels},
                {"base_channels", codec.base_channels},
                {"leaky_slope", codec.leaky_slope}};
  j["ec_base_channels"] = ec_base_channels;
  j["ac_base_channels"] = ac_base_channels;
  j["ac_blocks"] = ac_blocks;
  j["plan"] = {{"alpha", plan.alpha},
               {"lr", plan.lr},
               {"finetune_lr", plan.finetune_lr},
               {"ac_lr", plan.ac_lr},
               {"batch", plan.batch},
               {"epochs", plan.epochs},
               {"seed", plan.seed},
               {"guidance", plan.guidance}};
  j["alpha_sweep"] = alpha_sweep;
  j["mask_sweep"] = mask_sweep;
  j["mask"] = mask;
  j["budget_bytes"] = budget_bytes;
  j["raw_bits_per_pixel"] = raw_bits_per_pixel;
  j["finetune_steps"] = finetune_steps;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["best_of_seeds"] = best_of_seeds;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    auto get = [](const json& obj, const char* key, auto& slot) {
      if (obj.contains(key)) obj.at(key).get_to(slot);
    };
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      get(d, "kind", cfg.dataset.kind);
      get(d, "classes", cfg.dataset.classes);
      get(d, "train_samples", cfg.dataset.train_samples);
      get(d, "test_samples", cfg.dataset.test_samples);
      get(d, "height", cfg.dataset.height);
      get(d, "width", cfg.dataset.width);
      get(d, "channels", cfg.dataset.channels);
      get(d, "seed", cfg.dataset.seed);
      get(d, "difficulty", cfg.dataset.difficulty);
      get(d, "train_images", cfg.dataset.train_images);
      get(d, "train_labels", cfg.dataset.train_labels);
      get(d, "test_images", cfg.dataset.test_images);
      get(d, "test_labels", cfg.dataset.test_labels);
      get(d, "train_path", cfg.dataset.train_path);
      get(d, "test_path", cfg.dataset.test_path);
    }
    if (j.contains("codec")) {
      const auto& c = j["codec"];
      get(c, "height", cfg.codec.height);
      get(c, "width", cfg.codec.width);
      get(c, "channels", cfg.codec.channels);
      get(c, "downsample", cfg.codec.downsample);
      get(c, "latent_channels", cfg.codec.latent_channels);
      get(c, "base_channels", cfg.codec.base_channels);
      get(c, "leaky_slope", cfg.codec.leaky_slope);
    }
    get(j, "ec_base_channels", cfg.ec_base_channels);
    get(j, "ac_base_channels", cfg.ac_base_channels);
    get(j, "ac_blocks", cfg.ac_blocks);
    if (j.contains("plan")) {
      const auto& p = j["plan"];
      get(p, "alpha", cfg.plan.alpha);
      get(p, "lr", cfg.plan.lr);
      get(p, "finetune_lr", cfg.plan.finetune_lr);
      get(p, "ac_lr", cfg.plan.ac_lr);
      get(p, "batch", cfg.plan.batch);
      get(p, "epochs", cfg.plan.epochs);
      get(p, "seed", cfg.plan.seed);
      get(p, "guidance", cfg.plan.guidance);
    }
    get(j, "alpha_sweep", cfg.alpha_sweep);
    get(j, "mask_sweep", cfg.mask_sweep);
    get(j, "mask", cfg.mask);
    get(j, "budget_bytes", cfg.budget_bytes);
    get(j, "raw_bits_per_pixel", cfg.raw_bits_per_pixel);
    get(j, "finetune_steps", cfg.finetune_steps);
    get(j, "seeds", cfg.seeds);
    get(j, "output_dir", cfg.output_dir);
    get(j, "best_of_seeds", cfg.best_of_seeds);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace cdc
