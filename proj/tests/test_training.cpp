#include <doctest.h>

#include <cmath>

#include "cdc/data.hpp"
#include "cdc/param_store.hpp"
#include "cdc/training.hpp"

using namespace cdc;

namespace {

CodecConfig tiny_codec(int hw = 8) {
  CodecConfig cfg;
  cfg.height = hw;
  cfg.width = hw;
  cfg.channels = 1;
  cfg.downsample = 2;
  cfg.latent_channels = 4;
  cfg.base_channels = 4;
  return cfg;
}

ClassifierConfig tiny_ec(int classes, int hw = 8) {
  ClassifierConfig cfg;
  cfg.tier = ClassifierConfig::Tier::Elementary;
  cfg.classes = classes;
  cfg.height = cfg.width = hw;
  cfg.channels = 1;
  cfg.base_channels = 4;
  return cfg;
}

template <class T>
std::vector<Tensor<T>> to_batch(const LabeledDataset& data, std::size_t n) {
  std::vector<Tensor<T>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(data.images[i].template cast<T>());
  return out;
}

template <class T>
std::vector<std::vector<T>> snapshot(Network<T>& net) {
  std::vector<std::vector<T>> out;
  for (auto* p : net.params()) out.push_back(p->value.data);
  return out;
}

}  // namespace

TEST_CASE("classification loss hand values") {
  Tensor<double> perfect({2}, {1.0, 0.0});
  Tensor<double> uniform({2}, {0.5, 0.5});
  CHECK(classification_loss<double>({perfect}, {0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(classification_loss<double>({uniform}, {0}) == doctest::Approx(std::log(2.0)));
  CHECK(classification_loss<double>({perfect, uniform}, {0, 0}) ==
        doctest::Approx(std::log(2.0) / 2));  // 0.3466
  CHECK_THROWS_AS(classification_loss<double>({}, {}), ConfigError);
  Tensor<double> not_simplex({2}, {0.9, 0.3});
  CHECK_THROWS_AS(classification_loss<double>({not_simplex}, {0}), DomainError);
}

TEST_CASE("reconstruction loss hand values") {
  Tensor<double> x({2}, {1.0, 0.0});
  Tensor<double> zero({2});
  CHECK(reconstruction_loss<double>({x}, {x}) == 0.0);
  CHECK(reconstruction_loss<double>({zero}, {x}) == doctest::Approx(0.5));
  // per-sample squared norms 1 and 3 -> (1/4)*4 = 1
  Tensor<double> a({1}, {1.0}), a0({1}, {0.0});
  Tensor<double> b({3}, {1.0, 1.0, 1.0}), b0({3});
  CHECK(reconstruction_loss<double>({a0, b0}, {a, b}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(reconstruction_loss<double>({a}, {b}), ConfigError);
}

TEST_CASE("full loss attenuation arithmetic") {
  // L_A = 0.5, L_C = ln 2, alpha = 48
  double la = 0.5, lc = std::log(2.0);
  CHECK(la + lc / 48.0 == doctest::Approx(0.51444).epsilon(1e-4));
  CHECK(la + lc / 1e9 == doctest::Approx(la).epsilon(1e-6));
  CHECK(la + lc / 1.0 == doctest::Approx(la + lc));
}

TEST_CASE("full_loss on networks satisfies the attenuation identity") {
  LabeledDataset data = synthetic(2, 8, 8, 8, 1, 5, 0.1);
  Rng init(1);
  Autoencoder<double> ae(tiny_codec(), 4, init, 2);
  Network<double> ec = build_ec<double>(tiny_ec(2), init);
  auto xs = to_batch<double>(data, 4);
  std::vector<int> ys(data.labels.begin(), data.labels.begin() + 4);

  for (double alpha : {1.0, 48.0, 1e9}) {
    Autoencoder<double> ae_copy = ae.clone();
    LossReport r = full_loss(xs, ys, ae_copy, ec, alpha);
    CHECK(r.lf == doctest::Approx(r.la + r.lc / alpha).epsilon(1e-6));
    if (alpha == 1e9) CHECK(r.lf == doctest::Approx(r.la).epsilon(1e-6));
  }
  Autoencoder<double> ae_copy = ae.clone();
  CHECK_THROWS_AS(full_loss(xs, ys, ae_copy, ec, 0.5), ConfigError);
}

TEST_CASE("scalar quadratic hand check of the joint update rule") {
  // Contrived 1-d setup: AE output a*x with L_A = 0.5*(a*x - x)^2,
  // EC output c*a*x with L_C = 0.5*(c*a*x - y)^2.
  double a = 0.5, c = 2.0, x = 1.0, y = 1.0, alpha = 4.0, lr = 0.1;
  double recon = a * x;                    // 0.5
  double pred = c * recon;                 // 1.0 ... c * a * x
  double dLa_da = (recon - x) * x;         // -0.5
  double dLc_dpred = (pred - y);           // 0
  double dLc_dc = dLc_dpred * recon;
  double dLc_da = dLc_dpred * c * x;
  double delta_ec = dLc_dc;
  double delta_ae = dLa_da + dLc_da / alpha;
  CHECK(delta_ec == doctest::Approx(0.0));
  CHECK(delta_ae == doctest::Approx(-0.5));
  CHECK(a - lr * delta_ae == doctest::Approx(0.55));
  CHECK(c - lr * delta_ec == doctest::Approx(2.0));

  // same numbers with a nonzero classification residual
  y = 2.0;
  dLc_dpred = (pred - y);                  // -1
  delta_ec = dLc_dpred * recon;            // -0.5
  delta_ae = dLa_da + dLc_dpred * c * x / alpha;  // -0.5 + (-2)/4
  CHECK(delta_ec == doctest::Approx(-0.5));
  CHECK(delta_ae == doctest::Approx(-1.0));
}

TEST_CASE("joint_train_step matches a manual two-stream oracle exactly") {
  LabeledDataset data = synthetic(2, 6, 8, 8, 1, 9, 0.1);
  auto xs = to_batch<double>(data, 6);
  std::vector<int> ys = data.labels;
  TrainPlan plan;
  plan.alpha = 16.0;
  plan.lr = 0.05;
  plan.finetune_lr = 0.005;

  Rng init(3);
  Autoencoder<double> ae(tiny_codec(), 3, init, 4);
  Network<double> ec = build_ec<double>(tiny_ec(2), init);

  // Path A: the implementation.
  Autoencoder<double> ae_impl = ae.clone();
  Network<double> ec_impl = ec.clone();
  joint_train_step(xs, ys, ae_impl, ec_impl, plan);

  // Path B: manual per-sample forward/backward with explicit update.
  Autoencoder<double> ae_man = ae.clone();
  Network<double> ec_man = ec.clone();
  ae_man.zero_grad();
  ec_man.zero_grad();
  const double invt = 1.0 / xs.size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Tensor<double> xr = ae_man.forward_train(xs[i]);
    Tensor<double> p = ec_man.forward(xr);
    Tensor<double> gp(p.shape);
    gp[ys[i]] = -invt / p[ys[i]];
    Tensor<double> g_ec_in = ec_man.backward(gp);
    Tensor<double> g(xr.shape);
    for (std::size_t j = 0; j < xr.numel(); ++j) {
      g[j] = (xr[j] - xs[i][j]) * invt + g_ec_in[j] / plan.alpha;
    }
    ae_man.backward(g);
  }
  ec_man.sgd_step(plan.lr);
  ae_man.sgd_step(plan.lr);

  auto impl_enc = snapshot(ae_impl.encoder);
  auto man_enc = snapshot(ae_man.encoder);
  for (std::size_t i = 0; i < impl_enc.size(); ++i) {
    for (std::size_t j = 0; j < impl_enc[i].size(); ++j) {
      CHECK(impl_enc[i][j] == doctest::Approx(man_enc[i][j]).epsilon(1e-12));
    }
  }
  CHECK(snapshot(ec_impl) == snapshot(ec_man));
}

TEST_CASE("combined AE gradient decomposes into two separate passes (1e-10, float64)") {
  LabeledDataset data = synthetic(3, 6, 8, 8, 1, 13, 0.1);
  auto xs = to_batch<double>(data, 6);
  std::vector<int> ys = data.labels;
  const double alpha = 48.0;

  Rng init(7);
  Autoencoder<double> ae(tiny_codec(), 2, init, 8);
  Network<double> ec = build_ec<double>(tiny_ec(3), init);
  const double invt = 1.0 / xs.size();

  auto grads_of = [&](int mode) {  // 0: combined, 1: L_A only, 2: (1/alpha) L_C only
    Autoencoder<double> a = ae.clone();
    Network<double> e = ec.clone();
    a.zero_grad();
    e.zero_grad();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Tensor<double> xr = a.forward_train(xs[i]);
      Tensor<double> p = e.forward(xr);
      Tensor<double> gp(p.shape);
      gp[ys[i]] = -invt / p[ys[i]];
      Tensor<double> g_ec_in = e.backward(gp);
      Tensor<double> g(xr.shape);
      for (std::size_t j = 0; j < xr.numel(); ++j) {
        double ga = (xr[j] - xs[i][j]) * invt;
        double gc = g_ec_in[j] / alpha;
        g[j] = mode == 0 ? ga + gc : (mode == 1 ? ga : gc);
      }
      a.backward(g);
    }
    std::vector<double> flat;
    for (auto* p : a.encoder.params())
      flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
    for (auto* p : a.decoder.params())
      flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
    return flat;
  };

  auto combined = grads_of(0);
  auto la_only = grads_of(1);
  auto lc_only = grads_of(2);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(std::abs(combined[i] - (la_only[i] + lc_only[i])) < 1e-10);
  }
}

TEST_CASE("EC update is independent of alpha") {
  LabeledDataset data = synthetic(2, 4, 8, 8, 1, 21, 0.1);
  auto xs = to_batch<double>(data, 4);
  std::vector<int> ys = data.labels;

  Rng init(11);
  Autoencoder<double> ae(tiny_codec(), 4, init, 12);
  Network<double> ec = build_ec<double>(tiny_ec(2), init);

  std::vector<std::vector<std::vector<double>>> results;
  for (double alpha : {8.0, 256.0}) {
    Autoencoder<double> a = ae.clone();
    Network<double> e = ec.clone();
    TrainPlan plan;
    plan.alpha = alpha;
    joint_train_step(xs, ys, a, e, plan);
    results.push_back(snapshot(e));
  }
  CHECK(results[0] == results[1]);
}

TEST_CASE("alpha=1e12 trajectory equals the unguided trajectory") {
  LabeledDataset data = synthetic(2, 16, 8, 8, 1, 31, 0.1);
  TrainPlan guided;
  guided.alpha = 1e12;
  guided.lr = 0.02;
  guided.finetune_lr = 0.002;
  guided.epochs = 2;
  guided.batch = 4;
  guided.seed = 5;
  TrainPlan unguided = guided;
  unguided.guidance = false;

  auto run = [&](const TrainPlan& plan) {
    Rng init(plan.seed);
    Autoencoder<float> ae(tiny_codec(), 4, init, plan.seed + 100);
    Network<float> ec = build_ec<float>(tiny_ec(2), init);
    train_edge(data.images, data.labels, ae, ec, plan);
    auto enc = snapshot(ae.encoder);
    auto dec = snapshot(ae.decoder);
    enc.insert(enc.end(), dec.begin(), dec.end());
    return enc;
  };
  auto a = run(guided);
  auto b = run(unguided);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      CHECK(a[i][j] == doctest::Approx(b[i][j]).epsilon(1e-6));
    }
  }
}

TEST_CASE("train_edge is deterministic and zero epochs is a no-op") {
  LabeledDataset data = synthetic(2, 12, 8, 8, 1, 41, 0.15);
  TrainPlan plan;
  plan.epochs = 1;
  plan.batch = 4;
  plan.alpha = 16;

  auto run = [&](int epochs) {
    TrainPlan p = plan;
    p.epochs = epochs;
    Rng init(p.seed);
    Autoencoder<float> ae(tiny_codec(), 4, init, 77);
    Network<float> ec = build_ec<float>(tiny_ec(2), init);
    train_edge(data.images, data.labels, ae, ec, p);
    return serialize_network(ae.encoder);
  };
  CHECK(run(1) == run(1));

  Rng init(plan.seed);
  Autoencoder<float> ae(tiny_codec(), 4, init, 77);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  auto before = serialize_network(ae.encoder);
  TrainPlan zero = plan;
  zero.epochs = 0;
  EdgeTrainResult r = train_edge(data.images, data.labels, ae, ec, zero);
  CHECK(r.curve.empty());
  CHECK(r.converged);
  CHECK(serialize_network(ae.encoder) == before);
}

TEST_CASE("loss reports satisfy L_F = L_A + L_C/alpha on every step") {
  LabeledDataset data = synthetic(2, 24, 8, 8, 1, 51, 0.15);
  TrainPlan plan;
  plan.epochs = 2;
  plan.batch = 8;
  plan.alpha = 32;
  Rng init(plan.seed);
  Autoencoder<float> ae(tiny_codec(), 4, init, 78);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  EdgeTrainResult r = train_edge(data.images, data.labels, ae, ec, plan);
  CHECK(!r.curve.empty());
  for (const auto& rep : r.curve) {
    CHECK(rep.lf == doctest::Approx(rep.la + rep.lc / plan.alpha).epsilon(1e-6));
  }
}

TEST_CASE("stalled run surfaces the no-improvement condition") {
  LabeledDataset data = synthetic(2, 16, 8, 8, 1, 61, 0.15);
  TrainPlan plan;
  plan.epochs = 10;
  plan.batch = 4;
  plan.lr = 1e-12;  // effectively frozen: loss cannot improve
  plan.finetune_lr = 1e-13;
  Rng init(plan.seed);
  Autoencoder<float> ae(tiny_codec(), 4, init, 79);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  EdgeTrainResult r = train_edge(data.images, data.labels, ae, ec, plan);
  CHECK_FALSE(r.converged);
  CHECK(r.curve.size() < 40u);  // stopped before the full 10 epochs
}

TEST_CASE("joint training learns separable 2-class synthetic data") {
  LabeledDataset data = synthetic(2, 64, 8, 8, 1, 71, 0.0);
  TrainPlan plan;
  plan.alpha = 16;
  plan.lr = 0.02;
  plan.finetune_lr = 0.002;
  plan.batch = 8;
  plan.epochs = 63;  // ~500 steps
  Rng init(plan.seed);
  Autoencoder<float> ae(tiny_codec(), 2, init, 80);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  train_edge(data.images, data.labels, ae, ec, plan);

  int hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor<float> p = ec.forward(ae.reconstruct(data.images[i]));
    int best = p[1] > p[0] ? 1 : 0;
    if (best == data.labels[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / data.size() > 0.95);
}

TEST_CASE("cloud AC training with an identity codec equals the raw path bit-for-bit") {
  // Pixels drawn on the (q - 0.5)/16 grid are fixed points of the m=0 codec
  // when E and D are 1x1 identity convs.
  LabeledDataset data;
  data.classes = 2;
  Rng rng(81);
  for (int i = 0; i < 24; ++i) {
    Tensor<float> img({1, 8, 8});
    for (auto& v : img.data) {
      int q = 1 + static_cast<int>(rng.index(15));  // q in [1,15] -> x in (0,1)
      v = static_cast<float>((q - 0.5) / 16.0);
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(i % 2);
  }

  auto identity_net = [] {
    Rng r(0);
    Network<float> net({LayerSpec::conv2d(1, 1, 1)}, r);
    net.params()[0]->value.fill(1.0f);
    net.params()[1]->value.fill(0.0f);
    return net;
  };
  Network<float> enc = identity_net();
  Network<float> dec = identity_net();
  Autoencoder<float> ae(std::move(enc), std::move(dec), 0, 0);

  std::vector<LatentCode> codes;
  for (const auto& x : data.images) codes.push_back(ae.encode(x));
  // restoration is exact
  for (std::size_t i = 0; i < codes.size(); ++i) {
    Tensor<float> restored = ae.decoder.forward(dequantize<float>(codes[i], ae.qcfg));
    CHECK(restored.data == data.images[i].data);
  }

  ClassifierConfig ac_cfg = tiny_ec(2);
  ac_cfg.tier = ClassifierConfig::Tier::Advanced;
  ac_cfg.base_channels = 4;
  ac_cfg.blocks = 2;
  TrainPlan plan;
  plan.epochs = 2;
  plan.batch = 8;

  Rng ac_init(plan.seed + 17);
  Network<float> ac = build_ac<float>(ac_cfg, ac_init);
  CloudTrainResult cloud =
      train_cloud_ac(codes, data.labels, ae.decoder, ac, plan, data.images, data.labels);

  // raw-path oracle with the same seed and shuffle stream
  Rng ac_init2(plan.seed + 17);
  Network<float> ac2 = build_ac<float>(ac_cfg, ac_init2);
  std::vector<LatentCode> codes2 = codes;
  Network<float> dec2 = identity_net();
  CloudTrainResult cloud2 =
      train_cloud_ac(codes2, data.labels, dec2, ac2, plan, data.images, data.labels);
  CHECK(cloud.test_accuracy == cloud2.test_accuracy);
  CHECK(serialize_network(ac) == serialize_network(ac2));
}

TEST_CASE("shuffled labels drive cloud accuracy to chance") {
  LabeledDataset data = synthetic(4, 48, 8, 8, 1, 91, 0.05);
  Rng init(3);
  Autoencoder<float> ae(tiny_codec(), 4, init, 82);
  std::vector<LatentCode> codes;
  for (const auto& x : data.images) codes.push_back(ae.encode(x));

  std::vector<int> shuffled = data.labels;
  Rng shuffle_rng(123);
  shuffle_indices(shuffled, shuffle_rng);

  ClassifierConfig ac_cfg = tiny_ec(4);
  ac_cfg.tier = ClassifierConfig::Tier::Advanced;
  ac_cfg.base_channels = 4;
  ac_cfg.blocks = 2;
  TrainPlan plan;
  plan.epochs = 2;
  plan.batch = 8;
  Rng ac_init(29);
  Network<float> ac = build_ac<float>(ac_cfg, ac_init);
  CloudTrainResult cloud =
      train_cloud_ac(codes, shuffled, ae.decoder, ac, plan, data.images, data.labels);
  CHECK(cloud.test_accuracy < 0.55);  // chance is 0.25 on 4 classes
}

TEST_CASE("mask switch to the same m returns immediately") {
  LabeledDataset data = synthetic(2, 8, 8, 8, 1, 95, 0.1);
  Rng init(4);
  Autoencoder<float> ae(tiny_codec(), 4, init, 83);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  auto before = serialize_network(ae.encoder);
  TrainPlan plan;
  FinetuneResult r = finetune_on_mask_switch(ae, ec, 4, plan, data.images, data.labels,
                                             data.images, 10);
  CHECK_FALSE(r.switched);
  CHECK(r.mse_curve.empty());
  CHECK(serialize_network(ae.encoder) == before);
  CHECK(ae.qcfg.m == 4);
}

TEST_CASE("mask switch fine-tunes at the low learning rate and tracks MSE") {
  LabeledDataset data = synthetic(2, 16, 8, 8, 1, 97, 0.1);
  Rng init(5);
  Autoencoder<float> ae(tiny_codec(), 4, init, 84);
  Network<float> ec = build_ec<float>(tiny_ec(2), init);
  TrainPlan plan;
  plan.batch = 8;
  std::vector<Tensor<float>> eval(data.images.begin(), data.images.begin() + 8);
  FinetuneResult r = finetune_on_mask_switch(ae, ec, 0, plan, data.images, data.labels, eval, 6);
  CHECK(r.switched);
  CHECK(ae.qcfg.m == 0);
  CHECK(r.mse_curve.size() == 7u);  // pre-switch value + one per step
}
