#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdc/tensor.hpp"

namespace cdc {

// Labeled image dataset; samples are CHW tensors with values in [0, 1].
struct LabeledDataset {
  std::vector<Tensor<float>> images;
  std::vector<int> labels;
  int classes = 0;

  std::size_t size() const { return images.size(); }
  const std::vector<int>& sample_shape() const { return images.front().shape; }
};

// IDX (big-endian) image + label pair, pixels scaled to [0, 1].
LabeledDataset load_idx(const std::string& image_path, const std::string& label_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes.
LabeledDataset load_cifar_binary(const std::string& path);

// Fixture writers for the two binary formats (round-trip partners of the
// loaders; also used to build test data).
void write_idx(const std::string& image_path, const std::string& label_path,
               const LabeledDataset& data);
void write_cifar_binary(const std::string& path, const LabeledDataset& data);

// Class-conditional synthetic data: each class owns a distinct oriented
// high-frequency texture over a shared low-frequency background; difficulty
// scales additive noise. Deterministic in (classes, n, shape, seed,
// difficulty); classes are balanced.
LabeledDataset synthetic(int classes, int n, int height, int width, int channels,
                         std::uint64_t seed, double difficulty);

}  // namespace cdc
