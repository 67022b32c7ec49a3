#include "sprune/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sprune/errors.hpp"
#include "sprune/rng.hpp"

namespace sprune {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // 2051
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // 2049
constexpr Index kCifarRecordBytes = 3073;             // 1 label + 3072 pixels

const char* kMnistFiles[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                              "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path + ": cannot open");
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!f) throw FormatError(path + ": short read");
  return bytes;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

struct IdxImages {
  Index n, h, w;
  std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 16) throw FormatError(path + ": truncated header");
  const std::uint32_t magic = be32(bytes.data());
  if (magic != kIdxImageMagic)
    throw FormatError(path + ": bad magic " + std::to_string(magic) + ", expected 2051");
  const Index n = be32(bytes.data() + 4);
  const Index h = be32(bytes.data() + 8);
  const Index w = be32(bytes.data() + 12);
  const std::size_t expected = 16 + static_cast<std::size_t>(n * h * w);
  if (bytes.size() != expected)
    throw FormatError(path + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  IdxImages r{n, h, w, {}};
  r.pixels.assign(bytes.begin() + 16, bytes.end());
  return r;
}

std::vector<std::int32_t> parse_idx_labels(const std::string& path, Index expected_n) {
  auto bytes = read_file(path);
  if (bytes.size() < 8) throw FormatError(path + ": truncated header");
  const std::uint32_t magic = be32(bytes.data());
  if (magic != kIdxLabelMagic)
    throw FormatError(path + ": bad magic " + std::to_string(magic) + ", expected 2049");
  const Index n = be32(bytes.data() + 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(n))
    throw FormatError(path + ": expected " + std::to_string(8 + n) + " bytes, got " +
                      std::to_string(bytes.size()));
  if (n != expected_n)
    throw FormatError(path + ": " + std::to_string(n) + " labels for " +
                      std::to_string(expected_n) + " images");
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::uint8_t l = bytes[static_cast<std::size_t>(8 + i)];
    if (l > 9) throw FormatError(path + ": label " + std::to_string(l) + " out of range");
    labels[static_cast<std::size_t>(i)] = l;
  }
  return labels;
}

Dataset mnist_split(const std::string& dir, const char* image_file, const char* label_file,
                    Dataset::Split split) {
  auto img = parse_idx_images(dir + "/" + image_file);
  Dataset ds;
  ds.split = split;
  ds.n = img.n;
  ds.channels = 1;
  ds.height = img.h;
  ds.width = img.w;
  ds.pixels = std::move(img.pixels);
  ds.labels = parse_idx_labels(dir + "/" + label_file, img.n);
  ds.mean = {0.1307, 0, 0};
  ds.stddev = {0.3081, 1, 1};
  return ds;
}

void append_cifar_file(const std::string& path, Dataset& ds) {
  auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % static_cast<std::size_t>(kCifarRecordBytes) != 0)
    throw FormatError(path + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  const Index n = static_cast<Index>(bytes.size()) / kCifarRecordBytes;
  for (Index i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] > 9)
      throw FormatError(path + ": record " + std::to_string(i) + " has label " +
                        std::to_string(rec[0]));
    ds.labels.push_back(rec[0]);
    ds.pixels.insert(ds.pixels.end(), rec + 1, rec + kCifarRecordBytes);
  }
  ds.n += n;
}

}  // namespace

DatasetPair load_mnist(const std::string& dir) {
  DatasetPair p;
  p.train = mnist_split(dir, kMnistFiles[0], kMnistFiles[1], Dataset::Split::train);
  p.test = mnist_split(dir, kMnistFiles[2], kMnistFiles[3], Dataset::Split::test);
  return p;
}

DatasetPair load_cifar10(const std::string& dir) {
  DatasetPair p;
  auto blank = [](Dataset::Split split) {
    Dataset ds;
    ds.split = split;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.mean = {0.4914, 0.4822, 0.4465};
    ds.stddev = {0.2470, 0.2435, 0.2616};
    return ds;
  };
  p.train = blank(Dataset::Split::train);
  for (int b = 1; b <= 5; ++b)
    append_cifar_file(dir + "/data_batch_" + std::to_string(b) + ".bin", p.train);
  p.test = blank(Dataset::Split::test);
  append_cifar_file(dir + "/test_batch.bin", p.test);
  return p;
}

void write_idx_images(const std::string& path, Index n, Index h, Index w,
                      const std::uint8_t* pixels) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(16 + n * h * w));
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(n));
  put_be32(out, static_cast<std::uint32_t>(h));
  put_be32(out, static_cast<std::uint32_t>(w));
  out.insert(out.end(), pixels, pixels + n * h * w);
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

void write_idx_labels(const std::string& path, Index n, const std::uint8_t* labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(n));
  out.insert(out.end(), labels, labels + n);
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

void write_cifar_batch(const std::string& path, Index n, const std::uint8_t* pixels,
                       const std::int32_t* labels) {
  std::ofstream f(path, std::ios::binary);
  for (Index i = 0; i < n; ++i) {
    const auto label = static_cast<char>(labels[i]);
    f.write(&label, 1);
    f.write(reinterpret_cast<const char*>(pixels + i * 3072), 3072);
  }
}

std::vector<std::uint8_t> idx_image_bytes(const Dataset& ds) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.n));
  put_be32(out, static_cast<std::uint32_t>(ds.height));
  put_be32(out, static_cast<std::uint32_t>(ds.width));
  out.insert(out.end(), ds.pixels.begin(), ds.pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_label_bytes(const Dataset& ds) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.n));
  for (std::int32_t l : ds.labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

std::vector<std::uint8_t> cifar_batch_bytes(const Dataset& ds, Index first, Index count) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(count * kCifarRecordBytes));
  for (Index i = first; i < first + count; ++i) {
    out.push_back(static_cast<std::uint8_t>(ds.labels[static_cast<std::size_t>(i)]));
    const std::uint8_t* px = ds.pixels.data() + i * ds.image_elems();
    out.insert(out.end(), px, px + ds.image_elems());
  }
  return out;
}

Tensor<float> make_batch(const Dataset& ds, std::span<const std::int32_t> indices) {
  const Index b = static_cast<Index>(indices.size());
  const Index elems = ds.image_elems();
  const Index plane = ds.height * ds.width;
  Tensor<float> batch({b, ds.channels, ds.height, ds.width});
  for (Index i = 0; i < b; ++i) {
    const std::int32_t idx = indices[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= ds.n) throw UsageError("make_batch: index out of range");
    const std::uint8_t* px = ds.pixels.data() + static_cast<Index>(idx) * elems;
    float* out = batch.data() + i * elems;
    for (Index c = 0; c < ds.channels; ++c) {
      const auto mean = static_cast<float>(ds.mean[static_cast<std::size_t>(c)]);
      const auto inv_std = static_cast<float>(1.0 / ds.stddev[static_cast<std::size_t>(c)]);
      for (Index j = 0; j < plane; ++j) {
        const Index at = c * plane + j;
        out[at] = (static_cast<float>(px[at]) / 255.0f - mean) * inv_std;
      }
    }
  }
  return batch;
}

std::vector<std::int32_t> gather_labels(const Dataset& ds,
                                        std::span<const std::int32_t> indices) {
  std::vector<std::int32_t> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out[i] = ds.labels[static_cast<std::size_t>(indices[i])];
  return out;
}

std::vector<std::int32_t> BatchPlan::epoch_order(int epoch, Index n) const {
  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(
      derive_seed(seed, SeedPurpose::kBatchOrder, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void flip_horizontal(Tensor<float>& batch) {
  const Index b = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  for (Index i = 0; i < b * c * h; ++i) {
    float* row = batch.data() + i * w;
    std::reverse(row, row + w);
  }
}

Tensor<float> crop_shift(const Tensor<float>& batch, int dy, int dx, int pad) {
  const Index b = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor<float> out(batch.shape());
  for (Index i = 0; i < b * c; ++i) {
    const float* src = batch.data() + i * h * w;
    float* dst = out.data() + i * h * w;
    for (Index y = 0; y < h; ++y) {
      const Index sy = y + dy - pad;
      for (Index x = 0; x < w; ++x) {
        const Index sx = x + dx - pad;
        dst[y * w + x] =
            (sy >= 0 && sy < h && sx >= 0 && sx < w) ? src[sy * w + sx] : 0.0f;
      }
    }
  }
  return out;
}

Tensor<float> augment(const Tensor<float>& batch, std::mt19937_64& rng) {
  if (batch.rank() != 4) throw DimensionError("augment: need a 4-d batch");
  constexpr int kPad = 4;
  const Index b = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> shift(0, 2 * kPad);
  Tensor<float> out(batch.shape());
  for (Index i = 0; i < b; ++i) {
    const bool flip = coin(rng) == 1;
    const int dy = shift(rng), dx = shift(rng);
    for (Index ch = 0; ch < c; ++ch) {
      const float* src = batch.data() + (i * c + ch) * h * w;
      float* dst = out.data() + (i * c + ch) * h * w;
      for (Index y = 0; y < h; ++y) {
        const Index sy = y + dy - kPad;
        for (Index x = 0; x < w; ++x) {
          const Index sx0 = x + dx - kPad;
          const Index sx = flip ? (w - 1 - sx0) : sx0;
          dst[y * w + x] =
              (sy >= 0 && sy < h && sx0 >= 0 && sx0 < w) ? src[sy * w + sx] : 0.0f;
        }
      }
    }
  }
  return out;
}

std::vector<std::int32_t> stats_batch_indices(const Dataset& ds, Index size,
                                              std::uint64_t seed) {
  if (size > ds.n)
    throw UsageError("stats_batch: requested " + std::to_string(size) + " of " +
                     std::to_string(ds.n) + " examples");
  std::vector<std::int32_t> order(static_cast<std::size_t>(ds.n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(size));
  return order;
}

Tensor<float> stats_batch(const Dataset& ds, Index size, std::uint64_t seed) {
  auto idx = stats_batch_indices(ds, size, seed);
  return make_batch(ds, idx);
}

namespace {

FileCheck check_idx(const std::string& dir, const char* file, bool images, Index expected_n) {
  FileCheck c{file, false, ""};
  const std::string path = dir + "/" + file;
  if (!std::filesystem::exists(path)) {
    c.detail = "missing";
    return c;
  }
  try {
    if (images) {
      auto img = parse_idx_images(path);
      if (img.n != expected_n) {
        c.detail = "count " + std::to_string(img.n) + ", expected " + std::to_string(expected_n);
        return c;
      }
      if (img.h != 28 || img.w != 28) {
        c.detail = "image size " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                   ", expected 28x28";
        return c;
      }
      c.detail = std::to_string(img.n) + " images, 28x28";
    } else {
      auto labels = parse_idx_labels(path, expected_n);
      c.detail = std::to_string(labels.size()) + " labels";
    }
    c.ok = true;
  } catch (const FormatError& e) {
    c.detail = e.what();
  }
  return c;
}

}  // namespace

std::vector<FileCheck> verify_mnist(const std::string& dir) {
  return {check_idx(dir, kMnistFiles[0], true, 60000), check_idx(dir, kMnistFiles[1], false, 60000),
          check_idx(dir, kMnistFiles[2], true, 10000),
          check_idx(dir, kMnistFiles[3], false, 10000)};
}

std::vector<FileCheck> verify_cifar10(const std::string& dir) {
  std::vector<std::string> files;
  for (int b = 1; b <= 5; ++b) files.push_back("data_batch_" + std::to_string(b) + ".bin");
  files.emplace_back("test_batch.bin");
  std::vector<FileCheck> checks;
  for (const auto& file : files) {
    FileCheck c{file, false, ""};
    const std::string path = dir + "/" + file;
    if (!std::filesystem::exists(path)) {
      c.detail = "missing";
      checks.push_back(c);
      continue;
    }
    try {
      Dataset probe;
      probe.channels = 3;
      probe.height = 32;
      probe.width = 32;
      append_cifar_file(path, probe);
      if (probe.n != 10000) {
        c.detail = "record count " + std::to_string(probe.n) + ", expected 10000";
      } else {
        c.detail = "10000 records";
        c.ok = true;
      }
    } catch (const FormatError& e) {
      c.detail = e.what();
    }
    checks.push_back(c);
  }
  return checks;
}

}  // namespace sprune
