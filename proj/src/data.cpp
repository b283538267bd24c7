#include "cdc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cdc/errors.hpp"
#include "cdc/rng.hpp"

namespace cdc {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t pos) {
  if (pos + 4 > b.size()) throw FormatError("truncated IDX header");
  return (static_cast<std::uint32_t>(b[pos]) << 24) | (static_cast<std::uint32_t>(b[pos + 1]) << 16) |
         (static_cast<std::uint32_t>(b[pos + 2]) << 8) | b[pos + 3];
}

void put_be32(std::ofstream& f, std::uint32_t v) {
  char buf[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 8), static_cast<char>(v)};
  f.write(buf, 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& image_path, const std::string& label_path) {
  auto ib = read_file(image_path);
  auto lb = read_file(label_path);
  if (ib.size() < 16 || be32(ib, 0) != kIdxImageMagic) {
    throw FormatError(image_path + ": bad IDX image magic");
  }
  if (lb.size() < 8 || be32(lb, 0) != kIdxLabelMagic) {
    throw FormatError(label_path + ": bad IDX label magic");
  }
  std::uint32_t n = be32(ib, 4);
  std::uint32_t rows = be32(ib, 8);
  std::uint32_t cols = be32(ib, 12);
  if (be32(lb, 4) != n) throw FormatError("IDX image/label count mismatch");
  std::size_t pix = static_cast<std::size_t>(rows) * cols;
  if (ib.size() != 16 + static_cast<std::size_t>(n) * pix) {
    throw FormatError(image_path + ": IDX image payload length mismatch");
  }
  if (lb.size() != 8 + n) throw FormatError(label_path + ": IDX label payload length mismatch");

  LabeledDataset data;
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor<float> img({1, static_cast<int>(rows), static_cast<int>(cols)});
    for (std::size_t j = 0; j < pix; ++j) {
      img[j] = static_cast<float>(ib[16 + static_cast<std::size_t>(i) * pix + j]) / 255.0f;
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(lb[8 + i]);
    max_label = std::max(max_label, static_cast<int>(lb[8 + i]));
  }
  data.classes = max_label + 1;
  return data;
}

LabeledDataset load_cifar_binary(const std::string& path) {
  auto b = read_file(path);
  constexpr std::size_t kRecord = 3073;
  if (b.empty() || b.size() % kRecord != 0) {
    throw FormatError(path + ": size is not a multiple of the 3073-byte record");
  }
  LabeledDataset data;
  data.classes = 10;
  std::size_t n = b.size() / kRecord;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = b.data() + i * kRecord;
    data.labels.push_back(rec[0]);
    Tensor<float> img({3, 32, 32});
    for (std::size_t j = 0; j < 3072; ++j) img[j] = static_cast<float>(rec[1 + j]) / 255.0f;
    data.images.push_back(std::move(img));
  }
  return data;
}

void write_idx(const std::string& image_path, const std::string& label_path,
               const LabeledDataset& data) {
  if (data.images.empty()) throw FormatError("cannot write empty IDX dataset");
  int rows = data.sample_shape()[1];
  int cols = data.sample_shape()[2];
  std::ofstream fi(image_path, std::ios::binary);
  std::ofstream fl(label_path, std::ios::binary);
  if (!fi || !fl) throw FormatError("cannot open IDX output files");
  put_be32(fi, kIdxImageMagic);
  put_be32(fi, static_cast<std::uint32_t>(data.size()));
  put_be32(fi, static_cast<std::uint32_t>(rows));
  put_be32(fi, static_cast<std::uint32_t>(cols));
  put_be32(fl, kIdxLabelMagic);
  put_be32(fl, static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (const float v : data.images[i].data) {
      fi.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
    fl.put(static_cast<char>(data.labels[i]));
  }
}

void write_cifar_binary(const std::string& path, const LabeledDataset& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    f.put(static_cast<char>(data.labels[i]));
    for (const float v : data.images[i].data) {
      f.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
  }
}

LabeledDataset synthetic(int classes, int n, int height, int width, int channels,
                         std::uint64_t seed, double difficulty) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  LabeledDataset data;
  data.classes = classes;
  Rng rng(seed);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i) {
    int c = i % classes;  // balanced by construction
    double theta = pi * c / classes;
    double ct = std::cos(theta), st = std::sin(theta);
    Tensor<float> img({channels, height, width});
    for (int ch = 0; ch < channels; ++ch) {
      double phase = 0.37 * ch;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          double bg = 0.5 + 0.3 * std::sin(2 * pi * y / height) * std::sin(2 * pi * x / width);
          double stripes = 0.2 * std::sin(2 * pi * (y * ct + x * st) / 3.0 + phase);
          double noise = difficulty * (2.0 * rng.unit() - 1.0);
          img.at(ch, y, x) = static_cast<float>(std::clamp(bg + stripes + noise, 0.0, 1.0));
        }
      }
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(c);
  }
  return data;
}

}  // namespace cdc
