#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sprune/dataset.hpp"
#include "sprune/rng.hpp"

using namespace sprune;
namespace fs = std::filesystem;

namespace {

std::string data_root() {
  const char* env = std::getenv("SPRUNE_DATA_DIR");
  return env && *env ? env : "data";
}

bool real_mnist_available() { return fs::exists(data_root() + "/mnist/train-images-idx3-ubyte"); }

// A tiny synthetic IDX pair: n images of h x w with pixel (i + j) % 256.
struct Fixture {
  fs::path dir;
  Index n;

  explicit Fixture(Index count, Index side = 8) : n(count) {
    dir = fs::temp_directory_path() / ("sprune_idx_" + std::to_string(::getpid()) + "_" +
                                       std::to_string(rand()));
    fs::create_directories(dir);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(n * side * side));
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 256);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 10;
    write_idx_images((dir / "train-images-idx3-ubyte").string(), n, side, side, px.data());
    write_idx_labels((dir / "train-labels-idx1-ubyte").string(), n, labels.data());
    write_idx_images((dir / "t10k-images-idx3-ubyte").string(), n, side, side, px.data());
    write_idx_labels((dir / "t10k-labels-idx1-ubyte").string(), n, labels.data());
  }
  ~Fixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("idx parser accepts the right magics and rejects others") {
  Fixture fx(20);
  auto pair = load_mnist(fx.dir.string());
  CHECK(pair.train.n == 20);
  CHECK(pair.train.channels == 1);

  // corrupt the image magic
  {
    std::fstream f(fx.dir / "train-images-idx3-ubyte",
                   std::ios::in | std::ios::out | std::ios::binary);
    char bad[4] = {0, 0, 8, 4};
    f.write(bad, 4);
  }
  CHECK_THROWS_AS(load_mnist(fx.dir.string()), FormatError);
}

TEST_CASE("truncated files are reported with the offending name") {
  Fixture fx(20);
  const auto img = fx.dir / "train-images-idx3-ubyte";
  fs::resize_file(img, fs::file_size(img) - 7);
  try {
    load_mnist(fx.dir.string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("train-images-idx3-ubyte") != std::string::npos);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }
}

TEST_CASE("image/label count mismatch is rejected") {
  Fixture fx(20);
  std::vector<std::uint8_t> labels(19, 1);
  write_idx_labels((fx.dir / "train-labels-idx1-ubyte").string(), 19, labels.data());
  CHECK_THROWS_AS(load_mnist(fx.dir.string()), FormatError);
}

TEST_CASE("mnist normalization of raw pixel 0") {
  Fixture fx(4);
  auto pair = load_mnist(fx.dir.string());
  pair.train.pixels[0] = 0;
  std::vector<std::int32_t> idx{0};
  auto batch = make_batch(pair.train, idx);
  CHECK(batch[0] == doctest::Approx((0.0 - 0.1307) / 0.3081).epsilon(1e-4));
}

TEST_CASE("parse then re-serialize is byte-identical") {
  Fixture fx(32);
  auto pair = load_mnist(fx.dir.string());
  std::ifstream f(fx.dir / "train-images-idx3-ubyte", std::ios::binary);
  std::vector<std::uint8_t> original((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
  CHECK(idx_image_bytes(pair.train) == original);

  std::ifstream lf(fx.dir / "train-labels-idx1-ubyte", std::ios::binary);
  std::vector<std::uint8_t> lbytes((std::istreambuf_iterator<char>(lf)),
                                   std::istreambuf_iterator<char>());
  CHECK(idx_label_bytes(pair.train) == lbytes);
}

TEST_CASE("cifar batches: record structure and round-trip") {
  const auto dir = fs::temp_directory_path() / "sprune_cifar_fixture";
  fs::create_directories(dir);
  const Index n = 30;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n * 3072));
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>((i * 7) % 256);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 10;
  for (int b = 1; b <= 5; ++b)
    write_cifar_batch((dir / ("data_batch_" + std::to_string(b) + ".bin")).string(), n, px.data(),
                      labels.data());
  write_cifar_batch((dir / "test_batch.bin").string(), n, px.data(), labels.data());

  auto pair = load_cifar10(dir.string());
  CHECK(pair.train.n == 5 * n);
  CHECK(pair.test.n == n);
  CHECK(pair.train.channels == 3);

  std::ifstream f(dir / "test_batch.bin", std::ios::binary);
  std::vector<std::uint8_t> original((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
  CHECK(cifar_batch_bytes(pair.test, 0, n) == original);

  // all-zero record: label 0, pixels normalize to -mean/std per channel
  std::vector<std::uint8_t> zeros(3073, 0);
  std::ofstream(dir / "test_batch.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(zeros.data()), 3073);
  auto z = load_cifar10(dir.string());
  CHECK(z.test.labels[0] == 0);
  std::vector<std::int32_t> idx{0};
  auto batch = make_batch(z.test, idx);
  CHECK(batch(0, 0, 0, 0) == doctest::Approx(-0.4914 / 0.2470).epsilon(1e-4));
  CHECK(batch(0, 1, 0, 0) == doctest::Approx(-0.4822 / 0.2435).epsilon(1e-4));
  CHECK(batch(0, 2, 0, 0) == doctest::Approx(-0.4465 / 0.2616).epsilon(1e-4));

  // trailing partial record
  std::vector<std::uint8_t> bad(3073 * 2 - 1, 0);
  std::ofstream(dir / "test_batch.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
  CHECK_THROWS_AS(load_cifar10(dir.string()), FormatError);

  fs::remove_all(dir);
}

TEST_CASE("batch plan covers every index exactly once per epoch") {
  BatchPlan plan{99, 16};
  for (int epoch : {0, 1, 7}) {
    auto order = plan.epoch_order(epoch, 100);
    std::set<std::int32_t> seen(order.begin(), order.end());
    CHECK(order.size() == 100);
    CHECK(seen.size() == 100);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 99);
  }
  CHECK(plan.epoch_order(3, 100) == plan.epoch_order(3, 100));
  CHECK(plan.epoch_order(3, 100) != plan.epoch_order(4, 100));
}

TEST_CASE("flip twice is the identity") {
  std::mt19937_64 rng(5);
  Tensor<float> batch({2, 3, 4, 4});
  for (Index i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>(i);
  Tensor<float> copy = batch;
  flip_horizontal(batch);
  flip_horizontal(batch);
  for (Index i = 0; i < batch.size(); ++i) CHECK(batch[i] == copy[i]);
}

TEST_CASE("zero-shift crop with no flip is the identity") {
  Tensor<float> batch({1, 3, 32, 32});
  for (Index i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>(i % 97);
  auto out = crop_shift(batch, 4, 4, 4);  // dy = dx = pad: no displacement
  for (Index i = 0; i < batch.size(); ++i) CHECK(out[i] == batch[i]);
}

TEST_CASE("augment keeps the batch shape") {
  std::mt19937_64 rng(11);
  Tensor<float> batch({5, 3, 32, 32});
  for (Index i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>((i * 13) % 31);
  auto out = augment(batch, rng);
  CHECK(out.shape() == batch.shape());
}

TEST_CASE("stats batch is deterministic and seed-sensitive") {
  Fixture fx(200);
  auto pair = load_mnist(fx.dir.string());
  auto a = stats_batch(pair.train, 60, 1234);
  auto b = stats_batch(pair.train, 60, 1234);
  CHECK(a.shape() == Shape{60, 1, 8, 8});
  CHECK(a.storage() == b.storage());

  auto idx1 = stats_batch_indices(pair.train, 60, 1234);
  auto idx2 = stats_batch_indices(pair.train, 60, 77);
  CHECK(idx1 != idx2);

  CHECK_THROWS_AS(stats_batch(pair.train, 500, 1), UsageError);
}

TEST_CASE("verify diagnostics list missing files") {
  auto checks = verify_mnist("/nonexistent_dir_for_sure");
  CHECK(checks.size() == 4);
  for (const auto& c : checks) {
    CHECK_FALSE(c.ok);
    CHECK(c.detail == "missing");
  }
}

TEST_CASE("official mnist: counts, histogram, stats batch, round trip") {
  if (!real_mnist_available()) {
    MESSAGE("real MNIST not present under ", data_root(), " -- skipping official checks");
    return;
  }
  auto pair = load_mnist(data_root() + "/mnist");
  CHECK(pair.train.n == 60000);
  CHECK(pair.test.n == 10000);
  CHECK(pair.train.height == 28);
  CHECK(pair.train.width == 28);

  // label histogram of the official train split
  std::array<int, 10> hist{};
  for (auto l : pair.train.labels) hist[static_cast<std::size_t>(l)]++;
  CHECK(hist[0] == 5923);
  CHECK(hist[1] == 6742);
  CHECK(hist[5] == 5421);

  auto batch = stats_batch(pair.train, 60, derive_seed(1, SeedPurpose::kStatsBatch));
  CHECK(batch.shape() == Shape{60, 1, 28, 28});

  std::ifstream f(data_root() + "/mnist/t10k-labels-idx1-ubyte", std::ios::binary);
  std::vector<std::uint8_t> original((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
  CHECK(idx_label_bytes(pair.test) == original);
}
