#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sprune/tensor.hpp"

namespace sprune {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

/// Serialized training state at an epoch boundary. The binary layout is
///   "IPRC" | u32 version
///   u32 n  | n x (u32 name_len, name, u8 dtype=0, u32 rank, u64 dims, f32 data)
///   u8 optimizer kind (0 none, 1 nadam, 2 nsgd) | u64 step
///   u32 n  | optimizer tensors in the same record format
///   u32 n  | n x (u32 name_len, name, u32 blob_len, blob)   -- RNG streams
///   u32 schedule position | u32 epoch index | u32 crc32 of everything above
/// all integers little-endian. A version or checksum mismatch is rejected.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<NamedTensor> params;
  std::uint8_t optimizer_kind = 0;
  std::uint64_t optimizer_step = 0;
  std::vector<NamedTensor> optimizer_tensors;
  std::vector<std::pair<std::string, std::string>> rng_states;
  std::uint32_t schedule_pos = 0;
  std::uint32_t epoch = 0;
};

std::vector<std::uint8_t> checkpoint_bytes(const Checkpoint& c);
Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sprune
