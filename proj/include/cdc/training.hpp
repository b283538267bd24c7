#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "cdc/models.hpp"

namespace cdc {

// Everything that determines a training run.
struct TrainPlan {
  double alpha = 48.0;     // classification attenuation rate, >= 1
  double lr = 0.05;        // shared by AE and EC during joint training
  double finetune_lr = 0.005;
  double ac_lr = 0.1;      // cloud-side AC training is a separate phase
  int batch = 32;
  int epochs = 3;
  std::uint64_t seed = 1;
  bool guidance = true;    // false = unguided autoencoder (alpha -> infinity)

  void validate() const {
    if (alpha < 1.0) throw ConfigError("attenuation rate alpha must be >= 1");
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (finetune_lr <= 0 || finetune_lr >= lr) {
      throw ConfigError("fine-tune learning rate must be in (0, lr)");
    }
    if (ac_lr <= 0) throw ConfigError("AC learning rate must be positive");
    if (batch < 1 || epochs < 0) throw ConfigError("invalid batch size or epoch count");
  }
};

struct LossReport {
  double la = 0;  // reconstruction loss
  double lc = 0;  // classification loss
  double lf = 0;  // la + lc / alpha
  long step = 0;
};

inline constexpr double kLogClamp = 1e-12;

// Cross-entropy over a batch: -(1/t) sum_i sum_j y_ij ln p_ij, with the log
// argument clamped at 1e-12.
template <class T>
double classification_loss(const std::vector<Tensor<T>>& probs, const std::vector<int>& labels) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw ConfigError("classification_loss: empty batch or label count mismatch");
  }
  double acc = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& p = probs[i];
    double sum = 0;
    for (const auto& v : p.data) sum += static_cast<double>(v);
    if (std::abs(sum - 1.0) > 1e-5) throw DomainError("probabilities do not sum to 1");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= p.numel()) {
      throw ConfigError("label out of range");
    }
    acc -= std::log(std::max(static_cast<double>(p[labels[i]]), kLogClamp));
  }
  return acc / static_cast<double>(probs.size());
}

// (1/2t) sum_i ||xr_i - x_i||^2.
template <class T>
double reconstruction_loss(const std::vector<Tensor<T>>& xr, const std::vector<Tensor<T>>& x) {
  if (xr.size() != x.size() || xr.empty()) throw ConfigError("reconstruction_loss: batch mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < xr.size(); ++i) {
    if (!xr[i].same_shape(x[i])) throw ConfigError("reconstruction_loss: shape mismatch");
    for (std::size_t j = 0; j < xr[i].numel(); ++j) {
      double d = static_cast<double>(xr[i][j]) - static_cast<double>(x[i][j]);
      acc += d * d;
    }
  }
  return acc / (2.0 * static_cast<double>(xr.size()));
}

// Evaluates the full loss L_F = L_A + L_C/alpha on one batch without
// touching gradients. L_C is computed on EC applied to the reconstruction.
template <class T>
LossReport full_loss(const std::vector<Tensor<T>>& xs, const std::vector<int>& ys,
                     Autoencoder<T>& ae, Network<T>& ec, double alpha) {
  if (alpha < 1.0) throw ConfigError("alpha must be >= 1");
  std::vector<Tensor<T>> recon, probs;
  recon.reserve(xs.size());
  probs.reserve(xs.size());
  for (const auto& x : xs) {
    recon.push_back(ae.forward_train(x));
    probs.push_back(ec.forward(recon.back()));
  }
  LossReport r;
  r.la = reconstruction_loss(recon, xs);
  r.lc = classification_loss(probs, ys);
  r.lf = r.la + r.lc / alpha;
  return r;
}

// One joint SGD step: EC gets grad of L_C alone, the AE gets grad of
// L_A + (1/alpha) L_C, both at the same learning rate. With guidance off
// the (1/alpha) term is dropped but EC still trains.
template <class T>
LossReport joint_train_step(const std::vector<Tensor<T>>& xs, const std::vector<int>& ys,
                            Autoencoder<T>& ae, Network<T>& ec, const TrainPlan& plan,
                            long step = 0) {
  plan.validate();
  if (xs.empty() || xs.size() != ys.size()) throw ConfigError("joint_train_step: bad batch");
  const T invt = T(1) / static_cast<T>(xs.size());
  ae.zero_grad();
  ec.zero_grad();
  double la = 0, lc = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Tensor<T> xr = ae.forward_train(xs[i]);
    Tensor<T> p = ec.forward(xr);

    for (std::size_t j = 0; j < xr.numel(); ++j) {
      double d = static_cast<double>(xr[j]) - static_cast<double>(xs[i][j]);
      la += 0.5 * d * d;
    }
    lc -= std::log(std::max(static_cast<double>(p[ys[i]]), kLogClamp));

    // d((1/t) L_C)/dp: nonzero only at the true class.
    Tensor<T> gp(p.shape);
    double pc = static_cast<double>(p[ys[i]]);
    if (pc > kLogClamp) gp[ys[i]] = static_cast<T>(-invt / pc);
    Tensor<T> g_ec_in = ec.backward(gp);

    Tensor<T> g_ae(xr.shape);
    for (std::size_t j = 0; j < xr.numel(); ++j) {
      g_ae[j] = (xr[j] - xs[i][j]) * invt;
      if (plan.guidance) g_ae[j] += g_ec_in[j] / static_cast<T>(plan.alpha);
    }
    ae.backward(g_ae);
  }
  LossReport r;
  r.la = la / xs.size();
  r.lc = lc / xs.size();
  r.lf = r.la + (plan.guidance ? r.lc / plan.alpha : 0.0);
  r.step = step;
  if (!std::isfinite(r.lf)) throw DivergenceError("non-finite loss", step);
  ec.sgd_step(static_cast<T>(plan.lr));
  ae.sgd_step(static_cast<T>(plan.lr));
  return r;
}

// No-improvement detector: a run is non-converging when the best L_F inside
// the trailing window (20% of total steps) fails to improve on the best
// before it by at least 1%.
class ConvergenceMonitor {
 public:
  // The window never drops below 10 steps: shorter histories are all batch
  // noise and would flag healthy runs.
  explicit ConvergenceMonitor(long total_steps)
      : window_(std::max<long>(10, total_steps / 5)) {}

  void observe(double lf) { history_.push_back(lf); }

  bool stalled() const {
    if (static_cast<long>(history_.size()) < 2 * window_) return false;
    double best_before = std::numeric_limits<double>::infinity();
    double best_recent = std::numeric_limits<double>::infinity();
    std::size_t cut = history_.size() - static_cast<std::size_t>(window_);
    for (std::size_t i = 0; i < history_.size(); ++i) {
      (i < cut ? best_before : best_recent) = std::min(i < cut ? best_before : best_recent,
                                                       history_[i]);
    }
    return best_recent > best_before * 0.99;
  }

 private:
  long window_;
  std::vector<double> history_;
};

struct EdgeTrainResult {
  std::vector<LossReport> curve;
  bool converged = true;
};

// Stage-1 joint training: epochs of shuffled mini-batches. Deterministic
// given the plan seed; stops early when the no-improvement detector fires.
template <class T>
EdgeTrainResult train_edge(const std::vector<Tensor<T>>& images, const std::vector<int>& labels,
                           Autoencoder<T>& ae, Network<T>& ec, const TrainPlan& plan) {
  plan.validate();
  if (images.empty() || images.size() != labels.size()) throw ConfigError("train_edge: bad dataset");
  EdgeTrainResult result;
  if (plan.epochs == 0) return result;

  Rng shuffle_rng(plan.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  long steps_per_epoch = static_cast<long>((images.size() + plan.batch - 1) / plan.batch);
  ConvergenceMonitor monitor(steps_per_epoch * plan.epochs);

  long step = 0;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < images.size(); start += plan.batch) {
      std::size_t end = std::min(images.size(), start + plan.batch);
      std::vector<Tensor<T>> xs;
      std::vector<int> ys;
      for (std::size_t i = start; i < end; ++i) {
        xs.push_back(images[order[i]]);
        ys.push_back(labels[order[i]]);
      }
      LossReport r = joint_train_step(xs, ys, ae, ec, plan, step++);
      monitor.observe(r.lf);
      result.curve.push_back(r);
      if (monitor.stalled()) {
        result.converged = false;
        return result;
      }
    }
  }
  return result;
}

template <class T>
double classifier_accuracy(Network<T>& net, const std::vector<Tensor<T>>& images,
                           const std::vector<int>& labels) {
  if (images.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tensor<T> p = net.forward(images[i]);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.numel(); ++j) {
      if (p[j] > p[best]) best = j;
    }
    if (static_cast<int>(best) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / images.size();
}

struct CloudTrainResult {
  double test_accuracy = 0;
  std::vector<double> loss_curve;
};

// Stage-2 cloud training: restore x' = D(Q'(codes)) once, train AC on the
// restored samples with cross-entropy, evaluate on the raw test set.
template <class T>
CloudTrainResult train_cloud_ac(const std::vector<LatentCode>& codes,
                                const std::vector<int>& labels, Network<T>& decoder,
                                Network<T>& ac, const TrainPlan& plan,
                                const std::vector<Tensor<T>>& test_images,
                                const std::vector<int>& test_labels) {
  plan.validate();
  if (codes.empty() || codes.size() != labels.size()) throw ConfigError("train_cloud_ac: bad payload");
  QuantizerConfig qcfg(codes.front().m);
  std::vector<Tensor<T>> restored;
  restored.reserve(codes.size());
  for (const auto& code : codes) {
    restored.push_back(decoder.forward(dequantize<T>(code, qcfg)));
  }

  CloudTrainResult result;
  Rng shuffle_rng(plan.seed ^ 0x7f4a7c159e3779b9ull);
  std::vector<std::size_t> order(restored.size());
  std::iota(order.begin(), order.end(), 0);
  const T invt_lr = static_cast<T>(plan.ac_lr);
  long step = 0;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < restored.size(); start += plan.batch) {
      std::size_t end = std::min(restored.size(), start + plan.batch);
      ac.zero_grad();
      double loss = 0;
      const T invt = T(1) / static_cast<T>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const Tensor<T>& x = restored[order[i]];
        int y = labels[order[i]];
        Tensor<T> p = ac.forward(x);
        loss -= std::log(std::max(static_cast<double>(p[y]), kLogClamp));
        Tensor<T> gp(p.shape);
        double pc = static_cast<double>(p[y]);
        if (pc > kLogClamp) gp[y] = static_cast<T>(-invt / pc);
        ac.backward(gp);
      }
      loss /= static_cast<double>(end - start);
      if (!std::isfinite(loss)) throw DivergenceError("non-finite AC loss", step);
      result.loss_curve.push_back(loss);
      ac.sgd_step(invt_lr);
      ++step;
    }
  }
  result.test_accuracy = classifier_accuracy(ac, test_images, test_labels);
  return result;
}

// Deterministic reconstruction MSE (eps = 0) over an evaluation subset.
template <class T>
double eval_mse(Autoencoder<T>& ae, const std::vector<Tensor<T>>& images) {
  double acc = 0;
  std::size_t n = 0;
  for (const auto& x : images) {
    Tensor<T> xr = ae.reconstruct(x);
    for (std::size_t j = 0; j < x.numel(); ++j) {
      double d = static_cast<double>(xr[j]) - static_cast<double>(x[j]);
      acc += d * d;
    }
    n += x.numel();
  }
  return acc / static_cast<double>(n);
}

struct FinetuneResult {
  std::vector<double> mse_curve;  // eval-subset MSE, entry 0 = pre-switch
  bool switched = false;
};

// Swap the quantizer mask and fine-tune at the low learning rate, tracking
// the deterministic reconstruction MSE on an evaluation subset.
template <class T>
FinetuneResult finetune_on_mask_switch(Autoencoder<T>& ae, Network<T>& ec, int new_m,
                                       const TrainPlan& plan,
                                       const std::vector<Tensor<T>>& images,
                                       const std::vector<int>& labels,
                                       const std::vector<Tensor<T>>& eval_subset,
                                       long max_steps) {
  plan.validate();
  FinetuneResult result;
  if (new_m == ae.qcfg.m) return result;
  result.switched = true;
  ae.qcfg = QuantizerConfig(new_m);
  result.mse_curve.push_back(eval_mse(ae, eval_subset));

  TrainPlan ft = plan;
  ft.lr = plan.finetune_lr;
  ft.finetune_lr = plan.finetune_lr / 10;  // keep the strict ordering valid
  Rng shuffle_rng(plan.seed ^ 0x2545f4914f6cdd1dull);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  while (step < max_steps) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < images.size() && step < max_steps;
         start += plan.batch) {
      std::size_t end = std::min(images.size(), start + plan.batch);
      std::vector<Tensor<T>> xs;
      std::vector<int> ys;
      for (std::size_t i = start; i < end; ++i) {
        xs.push_back(images[order[i]]);
        ys.push_back(labels[order[i]]);
      }
      joint_train_step(xs, ys, ae, ec, ft, step++);
      result.mse_curve.push_back(eval_mse(ae, eval_subset));
    }
  }
  return result;
}

}  // namespace cdc
