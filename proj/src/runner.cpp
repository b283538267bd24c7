#include "cdc/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cdc/param_store.hpp"

namespace cdc {

namespace fs = std::filesystem;

std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "synthetic") {
    // One stream split into train/test keeps the splits disjoint.
    LabeledDataset all = synthetic(spec.classes, spec.train_samples + spec.test_samples,
                                   spec.height, spec.width, spec.channels, spec.seed,
                                   spec.difficulty);
    LabeledDataset train, test;
    train.classes = test.classes = all.classes;
    for (int i = 0; i < spec.train_samples; ++i) {
      train.images.push_back(std::move(all.images[i]));
      train.labels.push_back(all.labels[i]);
    }
    for (int i = spec.train_samples; i < spec.train_samples + spec.test_samples; ++i) {
      test.images.push_back(std::move(all.images[i]));
      test.labels.push_back(all.labels[i]);
    }
    return {std::move(train), std::move(test)};
  }
  if (spec.kind == "idx") {
    return {load_idx(spec.train_images, spec.train_labels),
            load_idx(spec.test_images, spec.test_labels)};
  }
  if (spec.kind == "cifar") {
    return {load_cifar_binary(spec.train_path), load_cifar_binary(spec.test_path)};
  }
  throw ConfigError("unknown dataset kind: " + spec.kind);
}

PipelineResult run_pipeline(const LabeledDataset& train, const LabeledDataset& test,
                            const CodecConfig& codec, const ClassifierConfig& ec_cfg,
                            const ClassifierConfig& ac_cfg, TrainPlan plan, int m, bool guidance) {
  PipelineResult result;
  plan.guidance = guidance;
  try {
    Rng init(plan.seed);
    Autoencoder<float> ae(codec, m, init, plan.seed ^ 0xabcdef12345ull);
    Network<float> ec = build_ec<float>(ec_cfg, init);
    EdgeTrainResult edge = train_edge(train.images, train.labels, ae, ec, plan);
    result.converged = edge.converged;

    std::vector<LatentCode> codes;
    codes.reserve(train.size());
    for (const auto& x : train.images) codes.push_back(ae.encode(x));

    Rng ac_init(plan.seed + 17);
    Network<float> ac = build_ac<float>(ac_cfg, ac_init);
    CloudTrainResult cloud =
        train_cloud_ac(codes, train.labels, ae.decoder, ac, plan, test.images, test.labels);
    result.accuracy = cloud.test_accuracy;
    result.ok = true;
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

double run_ac_raw(const LabeledDataset& train, const LabeledDataset& test,
                  const ClassifierConfig& ac_cfg, const TrainPlan& plan) {
  Rng ac_init(plan.seed + 17);
  Network<float> ac = build_ac<float>(ac_cfg, ac_init);
  // Identity codec: train directly on raw samples via the same loop.
  Rng shuffle_rng(plan.seed ^ 0x7f4a7c159e3779b9ull);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  long step = 0;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < train.size(); start += plan.batch) {
      std::size_t end = std::min(train.size(), start + plan.batch);
      ac.zero_grad();
      const float invt = 1.0f / static_cast<float>(end - start);
      double loss = 0;
      for (std::size_t i = start; i < end; ++i) {
        const Tensor<float>& x = train.images[order[i]];
        int y = train.labels[order[i]];
        Tensor<float> p = ac.forward(x);
        loss -= std::log(std::max(static_cast<double>(p[y]), kLogClamp));
        Tensor<float> gp(p.shape);
        if (p[y] > kLogClamp) gp[y] = -invt / p[y];
        ac.backward(gp);
      }
      if (!std::isfinite(loss)) throw DivergenceError("non-finite AC loss", step);
      ac.sgd_step(static_cast<float>(plan.ac_lr));
      ++step;
    }
  }
  return classifier_accuracy(ac, test.images, test.labels);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_loss_csv(const fs::path& path, const std::vector<LossReport>& curve, int m,
                    double alpha, std::uint64_t seed) {
  std::string out = "step,la,lc,lf,m,alpha,seed\n";
  for (const auto& r : curve) {
    out += std::to_string(r.step) + "," + fmt(r.la) + "," + fmt(r.lc) + "," + fmt(r.lf) + "," +
           std::to_string(m) + "," + fmt(alpha) + "," + std::to_string(seed) + "\n";
  }
  write_text(path, out);
}

struct CellStats {
  std::vector<double> values;
  double mean() const {
    double s = 0;
    for (double v : values) s += v;
    return values.empty() ? 0 : s / values.size();
  }
  double stddev() const {
    if (values.size() < 2) return 0;
    double m = mean(), s = 0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / (values.size() - 1));
  }
  double best() const {
    double b = values.front();
    for (double v : values) b = std::max(b, v);
    return b;
  }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream f(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

int cmd_train_edge(const ExperimentConfig& cfg) {
  cfg.validate();
  auto [train, test] = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);

  Rng init(cfg.plan.seed);
  Autoencoder<float> ae(cfg.codec, cfg.mask, init, cfg.plan.seed ^ 0xabcdef12345ull);
  Network<float> ec = build_ec<float>(cfg.ec_config(), init);
  EdgeTrainResult edge = train_edge(train.images, train.labels, ae, ec, cfg.plan);

  fs::path dir(cfg.output_dir);
  write_loss_csv(dir / "edge_loss.csv", edge.curve, cfg.mask, cfg.plan.alpha, cfg.plan.seed);
  auto dump = [&](Network<float>& net, const char* name) {
    auto bytes = serialize_network(net);
    std::ofstream f(dir / name, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  };
  dump(ae.encoder, "encoder.cdcp");
  dump(ae.decoder, "decoder.cdcp");
  dump(ec, "ec.cdcp");

  if (!edge.converged) {
    std::cerr << "train-edge: non-convergence detected, checkpoints written anyway\n";
    return kExitNonConvergence;
  }
  std::cout << "train-edge: done, " << edge.curve.size() << " steps, final L_F "
            << fmt(edge.curve.empty() ? 0.0 : edge.curve.back().lf) << "\n";
  return kExitOk;
}

int cmd_sweep_alpha(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.alpha_sweep.empty()) throw ConfigError("alpha sweep list is empty");
  auto [train, test] = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);

  std::string csv = "alpha,seed,accuracy,status\n";
  auto run_cell = [&](const std::string& label, double alpha, bool guidance) {
    for (std::uint64_t seed : cfg.seeds) {
      TrainPlan plan = cfg.plan;
      plan.seed = seed;
      if (guidance) plan.alpha = alpha;
      PipelineResult r = run_pipeline(train, test, cfg.codec, cfg.ec_config(), cfg.ac_config(),
                                      plan, cfg.mask, guidance);
      if (r.ok) {
        csv += label + "," + std::to_string(seed) + "," + fmt(r.accuracy) + ",ok\n";
      } else {
        csv += label + "," + std::to_string(seed) + ",,failed:" + r.error + "\n";
      }
      std::cout << "sweep-alpha " << label << " seed " << seed << ": "
                << (r.ok ? fmt(r.accuracy) : "failed") << "\n";
    }
  };
  for (double alpha : cfg.alpha_sweep) run_cell(fmt(alpha), alpha, true);
  run_cell("control", 1.0, false);

  write_text(fs::path(cfg.output_dir) / "alpha_sweep.csv", csv);
  return kExitOk;
}

int cmd_sweep_mask(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mask_sweep.empty()) throw ConfigError("mask sweep list is empty");
  auto [train, test] = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);

  // Raw baseline accuracy first; accuracy loss is measured against its mean.
  CellStats baseline;
  std::string csv = "m,bpp,reduction_overhead_free_pct,seed,accuracy,accuracy_loss_pct,status\n";
  for (std::uint64_t seed : cfg.seeds) {
    TrainPlan plan = cfg.plan;
    plan.seed = seed;
    double acc = run_ac_raw(train, test, cfg.ac_config(), plan);
    baseline.values.push_back(acc);
    csv += "raw,16,0.000000," + std::to_string(seed) + "," + fmt(acc) + ",0.000000,ok\n";
    std::cout << "sweep-mask raw baseline seed " << seed << ": " << fmt(acc) << "\n";
  }
  double base_acc = cfg.best_of_seeds ? baseline.best() : baseline.mean();

  for (int m : cfg.mask_sweep) {
    int bpp = 5 - m;
    double reduction = 100.0 * (1.0 - static_cast<double>(bpp) / cfg.raw_bits_per_pixel);
    for (std::uint64_t seed : cfg.seeds) {
      TrainPlan plan = cfg.plan;
      plan.seed = seed;
      PipelineResult r = run_pipeline(train, test, cfg.codec, cfg.ec_config(), cfg.ac_config(),
                                      plan, m, true);
      if (r.ok) {
        double loss_pct = 100.0 * (base_acc - r.accuracy);
        csv += std::to_string(m) + "," + std::to_string(bpp) + "," + fmt(reduction) + "," +
               std::to_string(seed) + "," + fmt(r.accuracy) + "," + fmt(loss_pct) + ",ok\n";
      } else {
        csv += std::to_string(m) + "," + std::to_string(bpp) + "," + fmt(reduction) + "," +
               std::to_string(seed) + ",,,failed:" + r.error + "\n";
      }
      std::cout << "sweep-mask m=" << m << " seed " << seed << ": "
                << (r.ok ? fmt(r.accuracy) : "failed") << "\n";
    }
  }
  write_text(fs::path(cfg.output_dir) / "mask_sweep.csv", csv);
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  auto [train, test] = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);

  CollabConfig collab;
  collab.train = std::move(train);
  collab.test = std::move(test);
  collab.codec = cfg.codec;
  collab.ec_cfg = cfg.ec_config();
  collab.ac_cfg = cfg.ac_config();
  collab.plan = cfg.plan;
  collab.initial_m = cfg.mask;
  collab.budget_bytes = cfg.budget_bytes;
  collab.raw_bits_per_pixel = cfg.raw_bits_per_pixel;
  collab.finetune_steps = cfg.finetune_steps;

  CollaborationTranscript transcript = run_collaboration(collab);
  write_text(fs::path(cfg.output_dir) / "transcript.jsonl", transcript.to_jsonl());

  std::cout << "simulate: status " << transcript.final_status << ", rounds "
            << transcript.rounds.size() << ", total bytes " << transcript.ledger.spent()
            << ", reduction vs raw " << fmt(100.0 * transcript.ledger.reduction_vs_raw())
            << "%\n";
  std::cout << "  m trajectory:";
  for (const auto& r : transcript.rounds) std::cout << " " << r.m;
  std::cout << "\n  final accuracy "
            << fmt(transcript.rounds.empty() ? 0.0 : transcript.rounds.back().ac_accuracy) << "\n";
  return transcript.final_status == "terminated" ? kExitOk : kExitFailure;
}

int cmd_report(const std::string& output_dir) {
  fs::path dir(output_dir);
  bool found = false;

  fs::path alpha_csv = dir / "alpha_sweep.csv";
  if (fs::exists(alpha_csv)) {
    found = true;
    auto rows = read_csv(alpha_csv);
    std::map<std::string, CellStats> cells;
    std::vector<std::string> order;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4 || rows[i][3] != "ok") continue;
      if (!cells.count(rows[i][0])) order.push_back(rows[i][0]);
      cells[rows[i][0]].values.push_back(std::stod(rows[i][2]));
    }
    std::string out = "alpha,mean_accuracy,stddev,seeds\n";
    std::cout << "== attenuation-rate sweep ==\n";
    for (const auto& key : order) {
      const auto& c = cells[key];
      out += key + "," + fmt(c.mean()) + "," + fmt(c.stddev()) + "," +
             std::to_string(c.values.size()) + "\n";
      std::cout << "  alpha " << key << ": mean " << fmt(c.mean()) << " +- " << fmt(c.stddev())
                << " over " << c.values.size() << " seeds\n";
    }
    write_text(dir / "report_alpha.csv", out);
  }

  fs::path mask_csv = dir / "mask_sweep.csv";
  if (fs::exists(mask_csv)) {
    found = true;
    auto rows = read_csv(mask_csv);
    std::map<std::string, CellStats> acc_cells;
    std::map<std::string, std::pair<std::string, std::string>> meta;  // m -> (bpp, reduction)
    std::vector<std::string> order;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 7 || rows[i][6] != "ok") continue;
      if (!acc_cells.count(rows[i][0])) {
        order.push_back(rows[i][0]);
        meta[rows[i][0]] = {rows[i][1], rows[i][2]};
      }
      acc_cells[rows[i][0]].values.push_back(std::stod(rows[i][4]));
    }
    std::string out = "m,bpp,reduction_overhead_free_pct,mean_accuracy,stddev,seeds\n";
    std::cout << "== mask sweep ==\n";
    for (const auto& key : order) {
      const auto& c = acc_cells[key];
      out += key + "," + meta[key].first + "," + meta[key].second + "," + fmt(c.mean()) + "," +
             fmt(c.stddev()) + "," + std::to_string(c.values.size()) + "\n";
      std::cout << "  m " << key << " (bpp " << meta[key].first << ", reduction "
                << meta[key].second << "%): mean " << fmt(c.mean()) << " +- " << fmt(c.stddev())
                << "\n";
    }
    write_text(dir / "report_mask.csv", out);
  }

  fs::path transcript_path = dir / "transcript.jsonl";
  if (fs::exists(transcript_path)) {
    found = true;
    std::ifstream f(transcript_path);
    std::string line, last;
    while (std::getline(f, line)) {
      if (!line.empty()) last = line;
    }
    std::cout << "== collaboration summary ==\n  " << last << "\n";
  }

  if (!found) {
    std::cout << "report: no runs found in " << output_dir << "\n";
  }
  return kExitOk;
}

}  // namespace cdc
