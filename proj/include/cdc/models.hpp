#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cdc/layers.hpp"
#include "cdc/quantizer.hpp"

namespace cdc {

// Geometry of the compression autoencoder. With the default relation
// latent_channels = downsample^2 the latent symbol count M equals H*W,
// so one symbol per pixel and BPP = 5 - m.
struct CodecConfig {
  int height = 32;
  int width = 32;
  int channels = 3;
  int downsample = 4;
  int latent_channels = 16;
  int base_channels = 8;
  double leaky_slope = 0.01;

  void validate() const {
    if (height < 1 || width < 1 || channels < 1) throw ConfigError("invalid codec input shape");
    if (downsample < 1 || (downsample & (downsample - 1)) != 0) {
      throw ConfigError("downsample must be a positive power of two");
    }
    if (height % downsample != 0 || width % downsample != 0) {
      throw ConfigError("downsample must divide the spatial extents");
    }
    if (latent_channels < 1 || base_channels < 1) throw ConfigError("invalid channel counts");
  }

  std::vector<int> input_shape() const { return {channels, height, width}; }
  std::vector<int> latent_shape() const {
    return {latent_channels, height / downsample, width / downsample};
  }
  std::size_t latent_symbols() const {
    return static_cast<std::size_t>(latent_channels) * (height / downsample) *
           (width / downsample);
  }
};

struct ClassifierConfig {
  enum class Tier { Elementary, Advanced };

  Tier tier = Tier::Elementary;
  int classes = 10;
  int height = 32;
  int width = 32;
  int channels = 3;
  int base_channels = 8;
  int blocks = 3;  // advanced tier only

  void validate() const {
    if (classes < 2) throw ConfigError("classifier needs at least 2 classes");
    if (height < 4 || width < 4 || channels < 1) throw ConfigError("invalid classifier input shape");
    if (base_channels < 1 || blocks < 1) throw ConfigError("invalid classifier capacity");
  }
};

// Strided conv stack; LeakyReLU after every conv except the last, terminal
// Tanh pins the latent range to (-1, 1).
std::vector<LayerSpec> encoder_specs(const CodecConfig& cfg);

// Transposed-conv mirror of the encoder; last conv has no activation.
std::vector<LayerSpec> decoder_specs(const CodecConfig& cfg);

// Small conv/ReLU/pool stack with a linear head and softmax.
std::vector<LayerSpec> ec_specs(const ClassifierConfig& cfg);

// Deeper residual conv stack; strictly more parameters than the EC.
std::vector<LayerSpec> ac_specs(const ClassifierConfig& cfg);

template <class T>
Network<T> build_encoder(const CodecConfig& cfg, Rng& rng) {
  cfg.validate();
  return Network<T>(encoder_specs(cfg), rng, "enc.");
}

template <class T>
Network<T> build_decoder(const CodecConfig& cfg, Rng& rng) {
  cfg.validate();
  return Network<T>(decoder_specs(cfg), rng, "dec.");
}

template <class T>
Network<T> build_ec(const ClassifierConfig& cfg, Rng& rng) {
  if (cfg.tier != ClassifierConfig::Tier::Elementary) throw ConfigError("EC requires elementary tier");
  cfg.validate();
  return Network<T>(ec_specs(cfg), rng, "ec.");
}

template <class T>
Network<T> build_ac(const ClassifierConfig& cfg, Rng& rng) {
  if (cfg.tier != ClassifierConfig::Tier::Advanced) throw ConfigError("AC requires advanced tier");
  cfg.validate();
  return Network<T>(ac_specs(cfg), rng, "ac.");
}

// The terminal tanh keeps the latent mathematically inside (-1, 1), but
// float rounding can land exactly on the endpoints; nudge those back to the
// nearest representable interior value so the quantizer contract holds.
template <class T>
void clamp_open_unit(Tensor<T>& z) {
  const T hi = std::nextafter(T(1), T(0));
  for (auto& v : z.data) v = std::max(-hi, std::min(hi, v));
}

// The quantized autoencoder: encoder E, stochastic quantizer Q/Q', decoder D.
// The quantizer has an identity Jacobian, so backward chains the decoder's
// input gradient straight into the encoder.
template <class T>
struct Autoencoder {
  Network<T> encoder;
  Network<T> decoder;
  QuantizerConfig qcfg;
  NoiseSource noise;

  Autoencoder(const CodecConfig& cfg, int mask, Rng& init_rng, std::uint64_t noise_seed)
      : encoder(build_encoder<T>(cfg, init_rng)),
        decoder(build_decoder<T>(cfg, init_rng)),
        qcfg(mask),
        noise(noise_seed) {}

  Autoencoder(Network<T> enc, Network<T> dec, int mask, std::uint64_t noise_seed)
      : encoder(std::move(enc)), decoder(std::move(dec)), qcfg(mask), noise(noise_seed) {}

  // Training-mode reconstruction: fresh noise per element.
  Tensor<T> forward_train(const Tensor<T>& x) {
    Tensor<T> z = encoder.forward(x);
    clamp_open_unit(z);
    return decoder.forward(quantize_st(z, qcfg, noise));
  }

  // Deterministic reconstruction (eps = 0).
  Tensor<T> reconstruct(const Tensor<T>& x) {
    return decoder.forward(dequantize<T>(encode(x), qcfg));
  }

  // Deterministic latent code for upload (eps = 0).
  LatentCode encode(const Tensor<T>& x) {
    Tensor<T> z = encoder.forward(x);
    clamp_open_unit(z);
    return quantize(z, qcfg, nullptr);
  }

  // Straight-through backward: identity Jacobian across Q'/Q.
  Tensor<T> backward(const Tensor<T>& grad_out) {
    return encoder.backward(decoder.backward(grad_out));
  }

  void zero_grad() {
    encoder.zero_grad();
    decoder.zero_grad();
  }

  void sgd_step(T lr) {
    encoder.sgd_step(lr);
    decoder.sgd_step(lr);
  }

  // Clones parameters and the exact noise stream position.
  Autoencoder clone() const {
    Autoencoder copy(encoder.clone(), decoder.clone(), qcfg.m, 0);
    copy.noise = noise;
    return copy;
  }
};

}  // namespace cdc
