#include "cdc/models.hpp"

namespace cdc {

std::vector<LayerSpec> encoder_specs(const CodecConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> specs;
  int ch = cfg.channels;
  if (cfg.downsample == 1) {
    specs.push_back(LayerSpec::conv2d(ch, cfg.latent_channels, 3, 1, 1));
  } else {
    specs.push_back(LayerSpec::conv2d(ch, cfg.base_channels, 3, 1, 1));
    specs.push_back(LayerSpec::leaky_relu(cfg.leaky_slope));
    ch = cfg.base_channels;
    for (int d = cfg.downsample; d > 1; d /= 2) {
      specs.push_back(LayerSpec::conv2d(ch, 2 * cfg.base_channels, 4, 2, 1));
      specs.push_back(LayerSpec::leaky_relu(cfg.leaky_slope));
      ch = 2 * cfg.base_channels;
    }
    specs.push_back(LayerSpec::conv2d(ch, cfg.latent_channels, 3, 1, 1));
  }
  specs.push_back(LayerSpec::tanh());
  return specs;
}

std::vector<LayerSpec> decoder_specs(const CodecConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> specs;
  // Output bias starts at the approximate data mean so the first
  // reconstruction-loss gradients are not dominated by a constant offset.
  if (cfg.downsample == 1) {
    LayerSpec out = LayerSpec::tconv2d(cfg.latent_channels, cfg.channels, 3, 1, 1);
    out.bias_init = 0.5;
    specs.push_back(out);
    return specs;
  }
  int mid = 2 * cfg.base_channels;
  specs.push_back(LayerSpec::tconv2d(cfg.latent_channels, mid, 3, 1, 1));
  specs.push_back(LayerSpec::leaky_relu(cfg.leaky_slope));
  int ch = mid;
  for (int d = cfg.downsample; d > 1; d /= 2) {
    int next = d > 2 ? mid : cfg.base_channels;
    specs.push_back(LayerSpec::tconv2d(ch, next, 4, 2, 1));
    specs.push_back(LayerSpec::leaky_relu(cfg.leaky_slope));
    ch = next;
  }
  LayerSpec out = LayerSpec::tconv2d(ch, cfg.channels, 3, 1, 1);
  out.bias_init = 0.5;
  specs.push_back(out);
  return specs;
}

std::vector<LayerSpec> ec_specs(const ClassifierConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> specs;
  int b = cfg.base_channels;
  specs.push_back(LayerSpec::conv2d(cfg.channels, b, 3, 1, 1));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::max_pool2d(2));
  specs.push_back(LayerSpec::conv2d(b, 2 * b, 3, 1, 1));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::max_pool2d(2));
  std::vector<int> s = infer_output_shape(specs, {cfg.channels, cfg.height, cfg.width});
  int flat = s[0] * s[1] * s[2];
  specs.push_back(LayerSpec::linear(flat, cfg.classes));
  specs.push_back(LayerSpec::softmax());
  return specs;
}

std::vector<LayerSpec> ac_specs(const ClassifierConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> specs;
  int w = cfg.base_channels;
  auto res_block = [&] {
    return LayerSpec::residual({
        LayerSpec::conv2d(w, w, 3, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv2d(w, w, 3, 1, 1),
    });
  };
  // Strided stem keeps the deep blocks off the full-resolution grid.
  specs.push_back(LayerSpec::conv2d(cfg.channels, w, 3, 2, 1));
  specs.push_back(LayerSpec::relu());
  for (int i = 0; i < cfg.blocks; ++i) {
    specs.push_back(res_block());
    specs.push_back(LayerSpec::relu());
    if (i + 1 < cfg.blocks) specs.push_back(LayerSpec::max_pool2d(2));
  }
  specs.push_back(LayerSpec::avg_pool2d(2));
  std::vector<int> s = infer_output_shape(specs, {cfg.channels, cfg.height, cfg.width});
  int flat = s[0] * s[1] * s[2];
  specs.push_back(LayerSpec::linear(flat, cfg.classes));
  specs.push_back(LayerSpec::softmax());
  return specs;
}

}  // namespace cdc
