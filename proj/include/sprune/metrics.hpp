#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sprune/pruning.hpp"
#include "sprune/records.hpp"

namespace sprune {

struct LayerFootprint {
  int layer = 0;
  std::string name;
  std::int64_t params = 0;
};

struct FootprintReport {
  std::vector<LayerFootprint> per_layer;
  std::int64_t total = 0;
  std::int64_t original = 0;
  double compression = 1.0;     // original / total
  double remaining_pct = 100.0;
};

/// Counts weight elements with a live mask plus the biases of surviving
/// units; non-prunable layers count in full.
FootprintReport count_params(const ModelSpec& spec, const MaskRegistry& masks);

struct LayerFlops {
  int layer = 0;
  std::string name;
  std::int64_t flops = 0;
};

/// Single-inference flops at batch 1. Convention: 1 MAC = 2 flops for dense
/// and conv layers; ReLU and pooling cost 1 flop per surviving output
/// element (tracked separately in elementwise). With cascade on, the
/// effective input width of a layer shrinks by upstream dead units.
struct FlopReport {
  std::vector<LayerFlops> per_layer;
  std::int64_t total = 0;
  std::int64_t mac_flops = 0;
  std::int64_t elementwise = 0;
};

FlopReport count_flops(const ModelSpec& spec, const MaskRegistry& masks, bool cascade = false);

struct StabilityReport {
  double l2 = 0.0;
};

/// L2 distance over surviving parameter entries between the retrained
/// pruned network and the original network at its end of training.
StabilityReport stability(const Model& pruned, const Model& original, const MaskRegistry& masks);

struct CompressionAtDrop {
  double ratio = 1.0;
  bool qualified = false;  // false: no round met the accuracy bar
  int round = -1;
};

/// Largest compression among rounds with accuracy >= baseline - drop.
/// drop and accuracies are in percentage points.
CompressionAtDrop compression_at_drop(const std::vector<PruneRoundRecord>& records,
                                      double baseline_acc, double drop);

/// Smallest qualifying flop count under the same accuracy bar (used for
/// speedup ratios between policies).
struct FlopsAtDrop {
  std::int64_t flops = 0;
  bool qualified = false;
  int round = -1;
};
FlopsAtDrop flops_at_drop(const std::vector<PruneRoundRecord>& records, double baseline_acc,
                          double drop);

}  // namespace sprune
