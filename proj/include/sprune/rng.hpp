#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace sprune {

/// Purpose tags for deriving per-use RNG streams from the master seed.
/// Derivation: stream_seed = splitmix64(master ^ splitmix64(tag)).
enum class SeedPurpose : std::uint64_t {
  kInit = 1,       // parameter initialization
  kBatchOrder = 2, // per-epoch example permutations
  kAugment = 3,    // data augmentation decisions
  kStatsBatch = 4, // the fixed activation-statistics batch
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(purpose)));
}

/// Extra mixing level for streams that are also indexed (e.g. batch order
/// depends on the epoch as well as the purpose).
inline std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose, std::uint64_t index) {
  return splitmix64(derive_seed(master, purpose) ^ splitmix64(index));
}

inline std::mt19937_64 make_rng(std::uint64_t master, SeedPurpose purpose) {
  return std::mt19937_64(derive_seed(master, purpose));
}

/// mt19937_64 state as a portable text blob (used by checkpoint files).
inline std::string rng_state_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_state_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

}  // namespace sprune
