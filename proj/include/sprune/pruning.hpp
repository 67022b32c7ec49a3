#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sprune/model.hpp"

namespace sprune {

/// Binary unit masks (1 = alive) for every prunable layer. The unit mask
/// expands to the unit's whole weight slice plus its bias, so a filter or
/// neuron is either fully present or fully zero. Masks only ever go 1 -> 0.
struct MaskRegistry {
  std::map<int, std::vector<std::uint8_t>> units;  // layer index -> unit mask

  static MaskRegistry all_alive(const ModelSpec& spec);

  bool tracks(int layer) const { return units.count(layer) != 0; }
  bool alive(int layer, Index unit) const {
    return units.at(layer)[static_cast<std::size_t>(unit)] != 0;
  }
  Index alive_count(int layer) const;
  Index unit_count(int layer) const {
    return static_cast<Index>(units.at(layer).size());
  }

  /// Zero out masked rows/filters and their biases in place.
  void apply_to(Model& model) const;
  /// Zero the gradient entries of masked units; grads aligned with
  /// model.param_tensors() order ([w, b] per parameter layer).
  void zero_masked_grads(const Model& model, const std::vector<Tensor<float>*>& grads) const;
};

struct PruneDecision {
  std::vector<std::pair<int, Index>> units;  // (layer, unit)
  std::string policy;
  int round = 0;

  bool empty() const { return units.empty(); }
};

/// Marks the decision's units dead. Re-pruning an already-masked unit is a
/// usage error; emptying a layer is a policy error.
void apply_decision(MaskRegistry& masks, const PruneDecision& d);

/// Unmasked parameters (weights + biases) over prunable layers only.
std::int64_t prunable_param_count(const ModelSpec& spec, const MaskRegistry& masks);

// ---------------------------------------------------------------------------
// rankings and policies
// ---------------------------------------------------------------------------

struct PruneRates {
  double dense = 0.20;
  double conv = 0.10;

  double for_class(PruneClass c) const { return c == PruneClass::conv ? conv : dense; }
};

/// Unmasked units of one layer sorted ascending by the L1 norm of their
/// weight slice; ties broken by lower unit index.
std::vector<Index> l1_rank(const Model& model, const MaskRegistry& masks, int layer);

/// Mean activation per (layer, unit) over the fixed statistics batch.
/// Means of masked units are exactly zero.
struct ActivationStats {
  std::map<int, std::vector<double>> means;

  double at(int layer, Index unit) const {
    return means.at(layer)[static_cast<std::size_t>(unit)];
  }
};

/// Runs the model on the statistics batch in eval mode and reduces each
/// captured activation tensor. The mean divides by batch * spatial size;
/// paper_literal_mean divides the full sum by the batch size only.
ActivationStats collect_activation_stats(const Model& model, const MaskRegistry& masks,
                                         const Tensor<float>& stats_x,
                                         bool paper_literal_mean = false);

/// Mean activation of a single unit (convenience over a one-off capture).
double activation_mean(const Model& model, const MaskRegistry& masks,
                       const Tensor<float>& stats_x, int layer, Index unit,
                       bool paper_literal_mean = false);

/// Per layer, prunes floor(rate * alive) units with the smallest score,
/// ties by lower index. Rates must lie in (0,1), which also guarantees at
/// least one unit survives per layer. An all-layer floor of zero yields an
/// empty decision (rate saturation).
PruneDecision ilp_select(const Model& model, const MaskRegistry& masks, PruneRates rates,
                         int round);
PruneDecision iap_select(const ModelSpec& spec, const ActivationStats& stats,
                         const MaskRegistry& masks, PruneRates rates, int round);

/// True once floor(rate * alive) == 0 for every prunable layer.
bool rate_saturated(const ModelSpec& spec, const MaskRegistry& masks, PruneRates rates);

/// Adaptive threshold state. P[r] is the remaining prunable-parameter count
/// after round r; P[0] is the original count.
struct AiapState {
  double threshold = 0.0;
  double lambda = 0.01;
  std::vector<std::int64_t> param_history;
};

/// T[r] = 0 for r <= 3; afterwards grows by lambda whenever the previous
/// round removed less than 1% of the original prunable parameters:
///   d = (P[r-2] - P[r-1]) / P[0];  d < 1% -> T[r] = T[r-1] + lambda.
double aiap_update_threshold(AiapState& state, int round);

/// Prunes every unmasked unit whose mean activation is <= the current
/// threshold, keeping the single largest-mean unit when a whole layer falls
/// below it.
PruneDecision aiap_select(const ModelSpec& spec, const ActivationStats& stats,
                          const MaskRegistry& masks, const AiapState& state, int round);

/// AIAP saturation: every prunable layer is down to its last unit.
bool aiap_saturated(const ModelSpec& spec, const MaskRegistry& masks);

}  // namespace sprune
