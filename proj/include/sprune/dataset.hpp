#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sprune/tensor.hpp"

namespace sprune {

/// Images stay in their raw 8-bit form; batches are normalized on assembly.
struct Dataset {
  enum class Split { train, test };

  Split split = Split::train;
  Index n = 0, channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> pixels;  // n * channels * height * width, row-major
  std::vector<std::int32_t> labels;
  std::array<double, 3> mean{};    // per-channel, on the [0,1] pixel scale
  std::array<double, 3> stddev{};

  Index image_elems() const { return channels * height * width; }
};

struct DatasetPair {
  Dataset train, test;
};

// MNIST constants: mean 0.1307, std 0.3081 on the [0,1] scale.
// CIFAR-10: means 0.4914/0.4822/0.4465, stds 0.2470/0.2435/0.2616.
DatasetPair load_mnist(const std::string& dir);
DatasetPair load_cifar10(const std::string& dir);

/// Payload writers matching the on-disk formats (fixtures and round-trips).
void write_idx_images(const std::string& path, Index n, Index h, Index w,
                      const std::uint8_t* pixels);
void write_idx_labels(const std::string& path, Index n, const std::uint8_t* labels);
void write_cifar_batch(const std::string& path, Index n, const std::uint8_t* pixels,
                       const std::int32_t* labels);

/// Re-serialize a parsed dataset to the exact source bytes.
std::vector<std::uint8_t> idx_image_bytes(const Dataset& ds);
std::vector<std::uint8_t> idx_label_bytes(const Dataset& ds);
std::vector<std::uint8_t> cifar_batch_bytes(const Dataset& ds, Index first, Index count);

/// Normalized float batch [b x c x h x w] for the given example indices.
Tensor<float> make_batch(const Dataset& ds, std::span<const std::int32_t> indices);
std::vector<std::int32_t> gather_labels(const Dataset& ds, std::span<const std::int32_t> indices);

/// Deterministic per-epoch permutations derived from (seed, epoch).
struct BatchPlan {
  std::uint64_t seed = 0;
  Index batch_size = 60;

  std::vector<std::int32_t> epoch_order(int epoch, Index n) const;
  Index batches_per_epoch(Index n) const { return (n + batch_size - 1) / batch_size; }
};

/// In-place horizontal flip of every image in the batch.
void flip_horizontal(Tensor<float>& batch);
/// Shifted crop from zero padding: output(y,x) = input(y+dy-pad, x+dx-pad), zeros outside.
Tensor<float> crop_shift(const Tensor<float>& batch, int dy, int dx, int pad);
/// Standard CIFAR training augmentation: per-image coin-flip mirror plus a
/// random crop from 4-pixel zero padding. Output shape equals input shape.
Tensor<float> augment(const Tensor<float>& batch, std::mt19937_64& rng);

/// The fixed activation-statistics batch: drawn once from the train split
/// with its own seed, never augmented, identical across pruning rounds.
std::vector<std::int32_t> stats_batch_indices(const Dataset& ds, Index size, std::uint64_t seed);
Tensor<float> stats_batch(const Dataset& ds, Index size, std::uint64_t seed);

/// verify-data diagnostics: one entry per expected file.
struct FileCheck {
  std::string file;
  bool ok = false;
  std::string detail;
};
std::vector<FileCheck> verify_mnist(const std::string& dir);
std::vector<FileCheck> verify_cifar10(const std::string& dir);

}  // namespace sprune
