#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cdc/data.hpp"
#include "cdc/models.hpp"
#include "cdc/training.hpp"

using namespace cdc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cdc_data_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

LabeledDataset sample_dataset(int n, int h, int w, int c) {
  LabeledDataset data = synthetic(3, n, h, w, c, 42, 0.3);
  return data;
}

}  // namespace

TEST_CASE("IDX files round-trip through writer and loader") {
  TempDir tmp;
  LabeledDataset data = sample_dataset(10, 6, 5, 1);
  write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), data);
  LabeledDataset back = load_idx(tmp.file("img.idx"), tmp.file("lbl.idx"));

  REQUIRE(back.size() == data.size());
  CHECK(back.labels == data.labels);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.images[i].shape == data.images[i].shape);
    for (std::size_t j = 0; j < data.images[i].numel(); ++j) {
      // writer quantizes to bytes: exact to within half a pixel step
      CHECK(back.images[i][j] == doctest::Approx(data.images[i][j]).epsilon(0.5 / 255.0 + 1e-6));
    }
  }
}

TEST_CASE("IDX loader rejects malformed inputs") {
  TempDir tmp;
  LabeledDataset data = sample_dataset(4, 4, 4, 1);
  write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), data);

  SUBCASE("bad magic") {
    auto path = tmp.file("img.idx");
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('\x7f');
    f.close();
    CHECK_THROWS_AS(load_idx(path, tmp.file("lbl.idx")), FormatError);
  }
  SUBCASE("truncated image payload") {
    auto bytes = [&] {
      std::ifstream f(tmp.file("img.idx"), std::ios::binary);
      return std::vector<char>((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    }();
    bytes.resize(bytes.size() - 7);
    std::ofstream(tmp.file("trunc.idx"), std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_idx(tmp.file("trunc.idx"), tmp.file("lbl.idx")), FormatError);
  }
  SUBCASE("image/label count mismatch") {
    LabeledDataset fewer = sample_dataset(3, 4, 4, 1);
    write_idx(tmp.file("img3.idx"), tmp.file("lbl3.idx"), fewer);
    CHECK_THROWS_AS(load_idx(tmp.file("img.idx"), tmp.file("lbl3.idx")), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(tmp.file("nope.idx"), tmp.file("lbl.idx")), FormatError);
  }
}

TEST_CASE("IDX byte 255 maps to exactly 1.0") {
  TempDir tmp;
  LabeledDataset data;
  data.classes = 2;
  Tensor<float> img({1, 2, 2}, {1.0f, 0.0f, 1.0f, 0.0f});
  data.images.push_back(img);
  data.labels.push_back(1);
  write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), data);
  LabeledDataset back = load_idx(tmp.file("img.idx"), tmp.file("lbl.idx"));
  CHECK(back.images[0][0] == 1.0f);
  CHECK(back.images[0][1] == 0.0f);
}

TEST_CASE("CIFAR binary batches round-trip") {
  TempDir tmp;
  LabeledDataset data = sample_dataset(5, 32, 32, 3);
  write_cifar_binary(tmp.file("batch.bin"), data);
  CHECK(fs::file_size(tmp.file("batch.bin")) == 5u * 3073u);

  LabeledDataset back = load_cifar_binary(tmp.file("batch.bin"));
  REQUIRE(back.size() == 5u);
  CHECK(back.labels == data.labels);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.images[i].shape == std::vector<int>{3, 32, 32});
    for (std::size_t j = 0; j < back.images[i].numel(); ++j) {
      CHECK(back.images[i][j] == doctest::Approx(data.images[i][j]).epsilon(0.5 / 255.0 + 1e-6));
    }
  }
}

TEST_CASE("CIFAR loader rejects a partial record") {
  TempDir tmp;
  std::vector<char> bytes(3073 + 100, 0);
  std::ofstream(tmp.file("bad.bin"), std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_cifar_binary(tmp.file("bad.bin")), FormatError);
  std::ofstream(tmp.file("empty.bin"), std::ios::binary);
  CHECK_THROWS_AS(load_cifar_binary(tmp.file("empty.bin")), FormatError);
}

TEST_CASE("synthetic data is deterministic in its arguments") {
  LabeledDataset a = synthetic(4, 20, 8, 8, 1, 9, 0.25);
  LabeledDataset b = synthetic(4, 20, 8, 8, 1, 9, 0.25);
  REQUIRE(a.size() == b.size());
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.images[i].data == b.images[i].data);

  LabeledDataset c = synthetic(4, 20, 8, 8, 1, 10, 0.25);
  bool identical = true;
  for (std::size_t i = 0; i < a.size() && identical; ++i) {
    identical = a.images[i].data == c.images[i].data;
  }
  CHECK_FALSE(identical);
}

TEST_CASE("synthetic values stay in [0,1] and labels are balanced") {
  LabeledDataset data = synthetic(5, 50, 12, 12, 2, 3, 1.0);
  std::vector<int> counts(5, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++counts[data.labels[i]];
    for (const auto& v : data.images[i].data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      CHECK(std::isfinite(v));
    }
  }
  for (int c : counts) CHECK(c == 10);
}

TEST_CASE("noise-free synthetic classes are separable by a trained EC") {
  LabeledDataset data = synthetic(2, 32, 8, 8, 1, 17, 0.0);
  ClassifierConfig cfg;
  cfg.classes = 2;
  cfg.height = cfg.width = 8;
  cfg.channels = 1;
  cfg.base_channels = 4;
  Rng init(5);
  Network<float> ec = build_ec<float>(cfg, init);

  // plain cross-entropy training on the raw images
  TrainPlan plan;
  plan.lr = 0.05;
  plan.finetune_lr = 0.005;
  Rng shuffle_rng(99);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < 40; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < data.size(); start += 8) {
      std::size_t end = std::min(data.size(), start + 8);
      ec.zero_grad();
      const float invt = 1.0f / static_cast<float>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        Tensor<float> p = ec.forward(data.images[order[i]]);
        Tensor<float> gp(p.shape);
        gp[data.labels[order[i]]] = -invt / p[data.labels[order[i]]];
        ec.backward(gp);
      }
      ec.sgd_step(0.05f);
    }
  }
  CHECK(classifier_accuracy(ec, data.images, data.labels) == 1.0);
}

TEST_CASE("dataset invariants: CHW shape and class count") {
  LabeledDataset data = synthetic(7, 14, 10, 6, 3, 1, 0.5);
  CHECK(data.classes == 7);
  CHECK(data.sample_shape() == std::vector<int>{3, 10, 6});
  for (int y : data.labels) {
    CHECK(y >= 0);
    CHECK(y < 7);
  }
}
