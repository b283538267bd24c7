#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cdc/errors.hpp"
#include "cdc/rng.hpp"
#include "cdc/tensor.hpp"

namespace cdc {

enum class LayerKind {
  Conv2d,
  TransposedConv2d,
  Linear,
  LeakyReLU,
  ReLU,
  MaxPool2d,
  AvgPool2d,
  Tanh,
  Softmax,
  Residual,
};

// Declarative layer description; networks are built from ordered spec lists.
struct LayerSpec {
  LayerKind kind;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int in_features = 0;
  int out_features = 0;
  double slope = 0.01;
  double init_scale = 1.0;  // multiplies the Glorot weight bound
  double bias_init = 0.0;
  std::vector<LayerSpec> branch;  // Residual only

  static LayerSpec conv2d(int in_c, int out_c, int k, int s = 1, int p = 0) {
    LayerSpec l{LayerKind::Conv2d};
    l.in_channels = in_c;
    l.out_channels = out_c;
    l.kernel = k;
    l.stride = s;
    l.padding = p;
    return l;
  }
  static LayerSpec tconv2d(int in_c, int out_c, int k, int s = 1, int p = 0) {
    LayerSpec l{LayerKind::TransposedConv2d};
    l.in_channels = in_c;
    l.out_channels = out_c;
    l.kernel = k;
    l.stride = s;
    l.padding = p;
    return l;
  }
  static LayerSpec linear(int in_f, int out_f) {
    LayerSpec l{LayerKind::Linear};
    l.in_features = in_f;
    l.out_features = out_f;
    return l;
  }
  static LayerSpec leaky_relu(double slope = 0.01) {
    LayerSpec l{LayerKind::LeakyReLU};
    l.slope = slope;
    return l;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::ReLU}; }
  static LayerSpec max_pool2d(int k, int s = 0) {
    LayerSpec l{LayerKind::MaxPool2d};
    l.kernel = k;
    l.stride = s > 0 ? s : k;
    return l;
  }
  static LayerSpec avg_pool2d(int k, int s = 0) {
    LayerSpec l{LayerKind::AvgPool2d};
    l.kernel = k;
    l.stride = s > 0 ? s : k;
    return l;
  }
  static LayerSpec tanh() { return LayerSpec{LayerKind::Tanh}; }
  static LayerSpec softmax() { return LayerSpec{LayerKind::Softmax}; }
  static LayerSpec residual(std::vector<LayerSpec> branch) {
    LayerSpec l{LayerKind::Residual};
    l.branch = std::move(branch);
    return l;
  }

  void validate() const {
    switch (kind) {
      case LayerKind::Conv2d:
      case LayerKind::TransposedConv2d:
        if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || padding < 0) {
          throw ConfigError("invalid conv hyperparameters");
        }
        break;
      case LayerKind::Linear:
        if (in_features < 1 || out_features < 1) throw ConfigError("invalid linear extents");
        break;
      case LayerKind::MaxPool2d:
      case LayerKind::AvgPool2d:
        if (kernel < 1 || stride < 1) throw ConfigError("invalid pool hyperparameters");
        break;
      case LayerKind::Residual:
        if (branch.empty()) throw ConfigError("residual branch is empty");
        for (const auto& b : branch) b.validate();
        break;
      default:
        break;
    }
  }

  // Output shape from input shape, no parameters needed.
  std::vector<int> out_shape(const std::vector<int>& in, const std::string& where) const {
    auto fail = [&](const std::string& msg) -> std::vector<int> {
      throw ConfigError(where + ": " + msg + " (input " + shape_str(in) + ")");
    };
    switch (kind) {
      case LayerKind::Conv2d: {
        if (in.size() != 3 || in[0] != in_channels) return fail("expected CHW input with matching channels");
        int h = (in[1] + 2 * padding - kernel) / stride + 1;
        int w = (in[2] + 2 * padding - kernel) / stride + 1;
        if (in[1] + 2 * padding < kernel || h < 1 || w < 1) return fail("non-positive conv output extent");
        return {out_channels, h, w};
      }
      case LayerKind::TransposedConv2d: {
        if (in.size() != 3 || in[0] != in_channels) return fail("expected CHW input with matching channels");
        int h = (in[1] - 1) * stride - 2 * padding + kernel;
        int w = (in[2] - 1) * stride - 2 * padding + kernel;
        if (h < 1 || w < 1) return fail("non-positive transposed-conv output extent");
        return {out_channels, h, w};
      }
      case LayerKind::Linear: {
        std::size_t n = Tensor<float>::numel_of(in);
        if (n != static_cast<std::size_t>(in_features)) return fail("flattened input does not match in_features");
        return {out_features};
      }
      case LayerKind::MaxPool2d:
      case LayerKind::AvgPool2d: {
        if (in.size() != 3) return fail("expected CHW input");
        if (in[1] < kernel || in[2] < kernel) return fail("pool kernel larger than input");
        int h = (in[1] - kernel) / stride + 1;
        int w = (in[2] - kernel) / stride + 1;
        return {in[0], h, w};
      }
      case LayerKind::Residual: {
        std::vector<int> s = in;
        for (std::size_t i = 0; i < branch.size(); ++i) {
          s = branch[i].out_shape(s, where + ".res" + std::to_string(i));
        }
        if (s != in) return fail("residual branch does not preserve shape");
        return in;
      }
      default:
        return in;  // elementwise / softmax
    }
  }
};

inline std::vector<int> infer_output_shape(const std::vector<LayerSpec>& specs,
                                           std::vector<int> in) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    in = specs[i].out_shape(in, "layer" + std::to_string(i));
  }
  return in;
}

// A trainable parameter with its gradient slot.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool grad_set = false;

  Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& gout) = 0;
  virtual void collect_params(std::vector<Param<T>*>& out) {}
  virtual const std::string& name() const = 0;
};

namespace detail {

// Glorot-style uniform init in +-scale*sqrt(6/(fan_in+fan_out)).
template <class T>
void init_uniform(Tensor<T>& w, int fan_in, int fan_out, Rng& rng, double scale = 1.0) {
  double bound = scale * std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace detail

template <class T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(const LayerSpec& spec, std::string name, Rng& rng)
      : spec_(spec),
        name_(std::move(name)),
        weight_(name_ + ".weight",
                {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}),
        bias_(name_ + ".bias", {spec.out_channels}) {
    int k2 = spec.kernel * spec.kernel;
    detail::init_uniform(weight_.value, spec.in_channels * k2, spec.out_channels * k2, rng,
                         spec.init_scale);
    bias_.value.fill(static_cast<T>(spec.bias_init));
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    auto os = spec_.out_shape(x.shape, name_);
    in_ = x;
    Tensor<T> out(os);
    const int ic = spec_.in_channels, oc = spec_.out_channels, k = spec_.kernel;
    const int s = spec_.stride, p = spec_.padding;
    const int ih = x.shape[1], iw = x.shape[2], oh = os[1], ow = os[2];
    for (int o = 0; o < oc; ++o) {
      const T* wbase = &weight_.value.data[static_cast<std::size_t>(o) * ic * k * k];
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          T acc = bias_.value[o];
          for (int c = 0; c < ic; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              int yy = y * s - p + ky;
              if (yy < 0 || yy >= ih) continue;
              const T* row = &x.data[(static_cast<std::size_t>(c) * ih + yy) * iw];
              const T* wrow = wbase + (static_cast<std::size_t>(c) * k + ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                int xx = xo * s - p + kx;
                if (xx < 0 || xx >= iw) continue;
                acc += wrow[kx] * row[xx];
              }
            }
          }
          out.at(o, y, xo) = acc;
        }
      }
    }
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    const int ic = spec_.in_channels, oc = spec_.out_channels, k = spec_.kernel;
    const int s = spec_.stride, p = spec_.padding;
    const int ih = in_.shape[1], iw = in_.shape[2], oh = gout.shape[1], ow = gout.shape[2];
    Tensor<T> gin(in_.shape);
    for (int o = 0; o < oc; ++o) {
      T* gwbase = &weight_.grad.data[static_cast<std::size_t>(o) * ic * k * k];
      const T* wbase = &weight_.value.data[static_cast<std::size_t>(o) * ic * k * k];
      T gb = 0;
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          T g = gout.at(o, y, xo);
          gb += g;
          for (int c = 0; c < ic; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              int yy = y * s - p + ky;
              if (yy < 0 || yy >= ih) continue;
              const T* irow = &in_.data[(static_cast<std::size_t>(c) * ih + yy) * iw];
              T* girow = &gin.data[(static_cast<std::size_t>(c) * ih + yy) * iw];
              T* gwrow = gwbase + (static_cast<std::size_t>(c) * k + ky) * k;
              const T* wrow = wbase + (static_cast<std::size_t>(c) * k + ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                int xx = xo * s - p + kx;
                if (xx < 0 || xx >= iw) continue;
                gwrow[kx] += g * irow[xx];
                girow[xx] += g * wrow[kx];
              }
            }
          }
        }
      }
      bias_.grad[o] += gb;
    }
    weight_.grad_set = bias_.grad_set = true;
    return gin;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const std::string& name() const override { return name_; }

 private:
  LayerSpec spec_;
  std::string name_;
  Param<T> weight_, bias_;
  Tensor<T> in_;
  bool fwd_ = false;
};

template <class T>
class ConvTranspose2dLayer final : public Layer<T> {
 public:
  ConvTranspose2dLayer(const LayerSpec& spec, std::string name, Rng& rng)
      : spec_(spec),
        name_(std::move(name)),
        weight_(name_ + ".weight",
                {spec.in_channels, spec.out_channels, spec.kernel, spec.kernel}),
        bias_(name_ + ".bias", {spec.out_channels}) {
    int k2 = spec.kernel * spec.kernel;
    detail::init_uniform(weight_.value, spec.in_channels * k2, spec.out_channels * k2, rng,
                         spec.init_scale);
    bias_.value.fill(static_cast<T>(spec.bias_init));
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    auto os = spec_.out_shape(x.shape, name_);
    in_ = x;
    Tensor<T> out(os);
    const int ic = spec_.in_channels, oc = spec_.out_channels, k = spec_.kernel;
    const int s = spec_.stride, p = spec_.padding;
    const int ih = x.shape[1], iw = x.shape[2], oh = os[1], ow = os[2];
    for (int o = 0; o < oc; ++o) {
      T b = bias_.value[o];
      for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) {
        out.data[static_cast<std::size_t>(o) * oh * ow + i] = b;
      }
    }
    for (int c = 0; c < ic; ++c) {
      for (int y = 0; y < ih; ++y) {
        for (int xi = 0; xi < iw; ++xi) {
          T v = x.at(c, y, xi);
          for (int o = 0; o < oc; ++o) {
            const T* wbase =
                &weight_.value.data[((static_cast<std::size_t>(c) * oc + o) * k) * k];
            for (int ky = 0; ky < k; ++ky) {
              int yy = y * s - p + ky;
              if (yy < 0 || yy >= oh) continue;
              T* orow = &out.data[(static_cast<std::size_t>(o) * oh + yy) * ow];
              const T* wrow = wbase + static_cast<std::size_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                int xx = xi * s - p + kx;
                if (xx < 0 || xx >= ow) continue;
                orow[xx] += v * wrow[kx];
              }
            }
          }
        }
      }
    }
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    const int ic = spec_.in_channels, oc = spec_.out_channels, k = spec_.kernel;
    const int s = spec_.stride, p = spec_.padding;
    const int ih = in_.shape[1], iw = in_.shape[2], oh = gout.shape[1], ow = gout.shape[2];
    Tensor<T> gin(in_.shape);
    for (int o = 0; o < oc; ++o) {
      T gb = 0;
      const T* gorow = &gout.data[static_cast<std::size_t>(o) * oh * ow];
      for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) gb += gorow[i];
      bias_.grad[o] += gb;
    }
    for (int c = 0; c < ic; ++c) {
      for (int y = 0; y < ih; ++y) {
        for (int xi = 0; xi < iw; ++xi) {
          T v = in_.at(c, y, xi);
          T gacc = 0;
          for (int o = 0; o < oc; ++o) {
            const T* wbase =
                &weight_.value.data[((static_cast<std::size_t>(c) * oc + o) * k) * k];
            T* gwbase = &weight_.grad.data[((static_cast<std::size_t>(c) * oc + o) * k) * k];
            for (int ky = 0; ky < k; ++ky) {
              int yy = y * s - p + ky;
              if (yy < 0 || yy >= oh) continue;
              const T* grow = &gout.data[(static_cast<std::size_t>(o) * oh + yy) * ow];
              const T* wrow = wbase + static_cast<std::size_t>(ky) * k;
              T* gwrow = gwbase + static_cast<std::size_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                int xx = xi * s - p + kx;
                if (xx < 0 || xx >= ow) continue;
                gacc += grow[xx] * wrow[kx];
                gwrow[kx] += grow[xx] * v;
              }
            }
          }
          gin.at(c, y, xi) = gacc;
        }
      }
    }
    weight_.grad_set = bias_.grad_set = true;
    return gin;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const std::string& name() const override { return name_; }

 private:
  LayerSpec spec_;
  std::string name_;
  Param<T> weight_, bias_;
  Tensor<T> in_;
  bool fwd_ = false;
};

template <class T>
class LinearLayer final : public Layer<T> {
 public:
  LinearLayer(const LayerSpec& spec, std::string name, Rng& rng)
      : spec_(spec),
        name_(std::move(name)),
        weight_(name_ + ".weight", {spec.out_features, spec.in_features}),
        bias_(name_ + ".bias", {spec.out_features}) {
    detail::init_uniform(weight_.value, spec.in_features, spec.out_features, rng,
                         spec.init_scale);
    bias_.value.fill(static_cast<T>(spec.bias_init));
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    spec_.out_shape(x.shape, name_);
    in_ = x;
    Tensor<T> out({spec_.out_features});
    const int nin = spec_.in_features, nout = spec_.out_features;
    for (int o = 0; o < nout; ++o) {
      const T* wrow = &weight_.value.data[static_cast<std::size_t>(o) * nin];
      T acc = bias_.value[o];
      for (int i = 0; i < nin; ++i) acc += wrow[i] * x.data[i];
      out[o] = acc;
    }
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    const int nin = spec_.in_features, nout = spec_.out_features;
    Tensor<T> gin(in_.shape);
    for (int o = 0; o < nout; ++o) {
      T g = gout[o];
      bias_.grad[o] += g;
      const T* wrow = &weight_.value.data[static_cast<std::size_t>(o) * nin];
      T* gwrow = &weight_.grad.data[static_cast<std::size_t>(o) * nin];
      for (int i = 0; i < nin; ++i) {
        gwrow[i] += g * in_.data[i];
        gin.data[i] += g * wrow[i];
      }
    }
    weight_.grad_set = bias_.grad_set = true;
    return gin;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const std::string& name() const override { return name_; }

 private:
  LayerSpec spec_;
  std::string name_;
  Param<T> weight_, bias_;
  Tensor<T> in_;
  bool fwd_ = false;
};

template <class T>
class ActivationLayer final : public Layer<T> {
 public:
  ActivationLayer(const LayerSpec& spec, std::string name) : spec_(spec), name_(std::move(name)) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> out = x;
    switch (spec_.kind) {
      case LayerKind::ReLU:
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        break;
      case LayerKind::LeakyReLU: {
        T a = static_cast<T>(spec_.slope);
        for (auto& v : out.data) v = v > T(0) ? v : a * v;
        break;
      }
      case LayerKind::Tanh:
        for (auto& v : out.data) v = std::tanh(v);
        break;
      default:
        throw ConfigError(name_ + ": bad activation kind");
    }
    in_ = x;
    out_ = out;
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    Tensor<T> gin(in_.shape);
    switch (spec_.kind) {
      case LayerKind::ReLU:
        for (std::size_t i = 0; i < gin.numel(); ++i) gin[i] = in_[i] > T(0) ? gout[i] : T(0);
        break;
      case LayerKind::LeakyReLU: {
        T a = static_cast<T>(spec_.slope);
        for (std::size_t i = 0; i < gin.numel(); ++i)
          gin[i] = in_[i] > T(0) ? gout[i] : a * gout[i];
        break;
      }
      case LayerKind::Tanh:
        for (std::size_t i = 0; i < gin.numel(); ++i)
          gin[i] = gout[i] * (T(1) - out_[i] * out_[i]);
        break;
      default:
        break;
    }
    return gin;
  }

  const std::string& name() const override { return name_; }

 private:
  LayerSpec spec_;
  std::string name_;
  Tensor<T> in_, out_;
  bool fwd_ = false;
};

template <class T>
class Pool2dLayer final : public Layer<T> {
 public:
  Pool2dLayer(const LayerSpec& spec, std::string name) : spec_(spec), name_(std::move(name)) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    auto os = spec_.out_shape(x.shape, name_);
    in_shape_ = x.shape;
    Tensor<T> out(os);
    const int k = spec_.kernel, s = spec_.stride;
    const int c = x.shape[0], ih = x.shape[1], iw = x.shape[2], oh = os[1], ow = os[2];
    if (spec_.kind == LayerKind::MaxPool2d) argmax_.assign(out.numel(), 0);
    std::size_t oi = 0;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo, ++oi) {
          if (spec_.kind == LayerKind::MaxPool2d) {
            T best = x.at(ch, y * s, xo * s);
            std::size_t besti =
                (static_cast<std::size_t>(ch) * ih + y * s) * iw + xo * s;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                std::size_t idx =
                    (static_cast<std::size_t>(ch) * ih + y * s + ky) * iw + xo * s + kx;
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  besti = idx;
                }
              }
            }
            out[oi] = best;
            argmax_[oi] = besti;
          } else {
            T acc = 0;
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) acc += x.at(ch, y * s + ky, xo * s + kx);
            out[oi] = acc / static_cast<T>(k * k);
          }
        }
      }
    }
    out_shape_ = os;
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    Tensor<T> gin(in_shape_);
    const int k = spec_.kernel, s = spec_.stride;
    const int c = in_shape_[0], ih = in_shape_[1], iw = in_shape_[2];
    const int oh = out_shape_[1], ow = out_shape_[2];
    std::size_t oi = 0;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo, ++oi) {
          if (spec_.kind == LayerKind::MaxPool2d) {
            gin.data[argmax_[oi]] += gout[oi];
          } else {
            T g = gout[oi] / static_cast<T>(k * k);
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx)
                gin.data[(static_cast<std::size_t>(ch) * ih + y * s + ky) * iw + xo * s + kx] += g;
          }
        }
      }
    }
    return gin;
  }

  const std::string& name() const override { return name_; }

 private:
  LayerSpec spec_;
  std::string name_;
  std::vector<int> in_shape_, out_shape_;
  std::vector<std::size_t> argmax_;
  bool fwd_ = false;
};

template <class T>
class SoftmaxLayer final : public Layer<T> {
 public:
  explicit SoftmaxLayer(std::string name) : name_(std::move(name)) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> out = x;
    T mx = out[0];
    for (const auto& v : out.data) mx = std::max(mx, v);
    T sum = 0;
    for (auto& v : out.data) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : out.data) v /= sum;
    out_ = out;
    fwd_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout) override {
    if (!fwd_) throw StateError(name_ + ": backward before forward");
    T dot = 0;
    for (std::size_t i = 0; i < out_.numel(); ++i) dot += gout[i] * out_[i];
    Tensor<T> gin(out_.shape);
    for (std::size_t i = 0; i < out_.numel(); ++i) gin[i] = out_[i] * (gout[i] - dot);
    return gin;
  }

  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  Tensor<T> out_;
  bool fwd_ = false;
};

template <class T>
class Network;

template <class T>
class ResidualLayer final : public Layer<T> {
 public:
  ResidualLayer(const LayerSpec& spec, std::string name, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& gout) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  std::unique_ptr<Network<T>> branch_;
};

// Sequential network over an ordered layer-spec list.
template <class T>
class Network {
 public:
  Network() = default;

  Network(std::vector<LayerSpec> specs, Rng& init_rng, std::string prefix = "")
      : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      specs_[i].validate();
      layers_.push_back(make_layer(specs_[i], prefix + "layer" + std::to_string(i), init_rng));
    }
  }

  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur);
    fwd_ = true;
    return cur;
  }

  // Returns the gradient with respect to the network input; accumulates
  // parameter gradients.
  Tensor<T> backward(const Tensor<T>& gout) {
    if (!fwd_) throw StateError("network backward before forward");
    Tensor<T> cur = gout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) {
      p->grad.fill(T(0));
      p->grad_set = false;
    }
  }

  // p <- p - lr * grad for every parameter, then clears grads.
  void sgd_step(T lr) {
    auto ps = params();
    for (auto* p : ps) {
      if (!p->grad_set) throw StateError("sgd_step with missing grad for " + p->name);
    }
    for (auto* p : ps) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) p->value[i] -= lr * p->grad[i];
      p->grad.fill(T(0));
      p->grad_set = false;
    }
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }

  Network clone() const {
    Rng dummy(0);
    Network copy(specs_, dummy);
    auto src = const_cast<Network*>(this)->params();
    auto dst = copy.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
    return copy;
  }

  template <class U>
  Network<U> cast() const {
    Rng dummy(0);
    Network<U> copy(specs_, dummy);
    auto src = const_cast<Network*>(this)->params();
    auto dst = copy.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return copy;
  }

 private:
  static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::string name, Rng& rng) {
    switch (spec.kind) {
      case LayerKind::Conv2d:
        return std::make_unique<Conv2dLayer<T>>(spec, std::move(name), rng);
      case LayerKind::TransposedConv2d:
        return std::make_unique<ConvTranspose2dLayer<T>>(spec, std::move(name), rng);
      case LayerKind::Linear:
        return std::make_unique<LinearLayer<T>>(spec, std::move(name), rng);
      case LayerKind::ReLU:
      case LayerKind::LeakyReLU:
      case LayerKind::Tanh:
        return std::make_unique<ActivationLayer<T>>(spec, std::move(name));
      case LayerKind::MaxPool2d:
      case LayerKind::AvgPool2d:
        return std::make_unique<Pool2dLayer<T>>(spec, std::move(name));
      case LayerKind::Softmax:
        return std::make_unique<SoftmaxLayer<T>>(std::move(name));
      case LayerKind::Residual:
        return std::make_unique<ResidualLayer<T>>(spec, std::move(name), rng);
    }
    throw ConfigError("unknown layer kind");
  }

  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  bool fwd_ = false;
};

template <class T>
ResidualLayer<T>::ResidualLayer(const LayerSpec& spec, std::string name, Rng& rng)
    : name_(std::move(name)),
      branch_(std::make_unique<Network<T>>(spec.branch, rng, name_ + ".")) {}

template <class T>
Tensor<T> ResidualLayer<T>::forward(const Tensor<T>& x) {
  Tensor<T> b = branch_->forward(x);
  if (!b.same_shape(x)) throw ConfigError(name_ + ": residual branch changed shape");
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

template <class T>
Tensor<T> ResidualLayer<T>::backward(const Tensor<T>& gout) {
  Tensor<T> gb = branch_->backward(gout);
  Tensor<T> gin = gout;
  for (std::size_t i = 0; i < gin.numel(); ++i) gin[i] += gb[i];
  return gin;
}

template <class T>
void ResidualLayer<T>::collect_params(std::vector<Param<T>*>& out) {
  for (auto* p : branch_->params()) out.push_back(p);
}

}  // namespace cdc
