#include "sprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sprune/errors.hpp"

namespace sprune {

MaskRegistry MaskRegistry::all_alive(const ModelSpec& spec) {
  MaskRegistry r;
  for (int li : spec.prunable_layers())
    r.units[li] = std::vector<std::uint8_t>(
        static_cast<std::size_t>(spec.layers[static_cast<std::size_t>(li)].out), 1);
  return r;
}

Index MaskRegistry::alive_count(int layer) const {
  const auto& m = units.at(layer);
  return static_cast<Index>(std::count(m.begin(), m.end(), std::uint8_t(1)));
}

void MaskRegistry::apply_to(Model& model) const {
  for (const auto& [li, mask] : units) {
    auto& p = model.params[static_cast<std::size_t>(li)];
    const Index slice = model.spec.layers[static_cast<std::size_t>(li)].unit_weight_elems();
    for (Index u = 0; u < static_cast<Index>(mask.size()); ++u) {
      if (mask[static_cast<std::size_t>(u)]) continue;
      std::fill(p.w.data() + u * slice, p.w.data() + (u + 1) * slice, 0.0f);
      p.b[u] = 0.0f;
    }
  }
}

void MaskRegistry::zero_masked_grads(const Model& model,
                                     const std::vector<Tensor<float>*>& grads) const {
  std::size_t slot = 0;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (!model.params[i].present()) continue;
    Tensor<float>* gw = grads[slot];
    Tensor<float>* gb = grads[slot + 1];
    slot += 2;
    auto it = units.find(static_cast<int>(i));
    if (it == units.end()) continue;
    const Index slice = model.spec.layers[i].unit_weight_elems();
    for (Index u = 0; u < static_cast<Index>(it->second.size()); ++u) {
      if (it->second[static_cast<std::size_t>(u)]) continue;
      std::fill(gw->data() + u * slice, gw->data() + (u + 1) * slice, 0.0f);
      (*gb)[u] = 0.0f;
    }
  }
}

void apply_decision(MaskRegistry& masks, const PruneDecision& d) {
  for (const auto& [layer, unit] : d.units) {
    auto it = masks.units.find(layer);
    if (it == masks.units.end())
      throw UsageError("apply_decision: layer " + std::to_string(layer) + " is not prunable");
    if (unit < 0 || unit >= static_cast<Index>(it->second.size()))
      throw UsageError("apply_decision: unit " + std::to_string(unit) + " out of range");
    if (!it->second[static_cast<std::size_t>(unit)])
      throw UsageError("apply_decision: unit " + std::to_string(unit) + " of layer " +
                       std::to_string(layer) + " is already pruned");
    it->second[static_cast<std::size_t>(unit)] = 0;
  }
  for (const auto& [layer, mask] : masks.units)
    if (std::count(mask.begin(), mask.end(), std::uint8_t(1)) == 0)
      throw PolicyError("apply_decision: layer " + std::to_string(layer) + " left empty");
}

std::int64_t prunable_param_count(const ModelSpec& spec, const MaskRegistry& masks) {
  std::int64_t total = 0;
  for (int li : spec.prunable_layers()) {
    const auto& l = spec.layers[static_cast<std::size_t>(li)];
    total += masks.alive_count(li) * (l.unit_weight_elems() + 1);
  }
  return total;
}

std::vector<Index> l1_rank(const Model& model, const MaskRegistry& masks, int layer) {
  if (!masks.tracks(layer))
    throw UsageError("l1_rank: layer " + std::to_string(layer) + " is not prunable");
  const auto& l = model.spec.layers[static_cast<std::size_t>(layer)];
  const auto& w = model.params[static_cast<std::size_t>(layer)].w;
  const Index slice = l.unit_weight_elems();
  std::vector<std::pair<double, Index>> scored;
  for (Index u = 0; u < l.out; ++u) {
    if (!masks.alive(layer, u)) continue;
    double norm = 0;
    for (Index j = 0; j < slice; ++j) norm += std::abs(static_cast<double>(w[u * slice + j]));
    scored.emplace_back(norm, u);
  }
  if (scored.empty()) throw PolicyError("l1_rank: no unmasked units in layer " +
                                        std::to_string(layer));
  std::stable_sort(scored.begin(), scored.end());
  std::vector<Index> order;
  order.reserve(scored.size());
  for (const auto& [norm, u] : scored) order.push_back(u);
  return order;
}

ActivationStats collect_activation_stats(const Model& model, const MaskRegistry& masks,
                                         const Tensor<float>& stats_x, bool paper_literal_mean) {
  ForwardCapture capture;
  forward_eval(model, stats_x, &capture);
  ActivationStats stats;
  for (const auto& [layer, act] : capture.activations) {
    const Index b = act.dim(0);
    const Index units = act.dim(1);
    const Index spatial = act.rank() == 4 ? act.dim(2) * act.dim(3) : 1;
    std::vector<double> means(static_cast<std::size_t>(units), 0.0);
    for (Index i = 0; i < b; ++i)
      for (Index u = 0; u < units; ++u) {
        const float* p = act.data() + (i * units + u) * spatial;
        double acc = 0;
        for (Index j = 0; j < spatial; ++j) acc += p[j];
        means[static_cast<std::size_t>(u)] += acc;
      }
    const double denom =
        paper_literal_mean ? static_cast<double>(b) : static_cast<double>(b * spatial);
    for (Index u = 0; u < units; ++u) {
      means[static_cast<std::size_t>(u)] /= denom;
      if (!masks.alive(layer, u)) means[static_cast<std::size_t>(u)] = 0.0;
    }
    stats.means[layer] = std::move(means);
  }
  return stats;
}

double activation_mean(const Model& model, const MaskRegistry& masks,
                       const Tensor<float>& stats_x, int layer, Index unit,
                       bool paper_literal_mean) {
  if (!masks.alive(layer, unit))
    throw UsageError("activation_mean: unit " + std::to_string(unit) + " of layer " +
                     std::to_string(layer) + " is masked");
  auto stats = collect_activation_stats(model, masks, stats_x, paper_literal_mean);
  if (!stats.means.count(layer))
    throw UsageError("activation_mean: no captured activations for layer " +
                     std::to_string(layer));
  return stats.at(layer, unit);
}

namespace {

void check_rates(PruneRates rates) {
  if (rates.dense <= 0 || rates.dense >= 1 || rates.conv <= 0 || rates.conv >= 1)
    throw UsageError("prune rates must lie in (0,1)");
}

/// Shared count rule: prune the floor(rate * alive) lowest-scored units.
void select_lowest(const ModelSpec& spec, const MaskRegistry& masks, PruneRates rates,
                   int layer, const std::vector<std::pair<double, Index>>& scored,
                   PruneDecision& d) {
  const auto rate = rates.for_class(spec.layers[static_cast<std::size_t>(layer)].prune_class);
  const auto alive = static_cast<double>(masks.alive_count(layer));
  const auto n_prune = static_cast<std::size_t>(std::floor(rate * alive));
  for (std::size_t i = 0; i < n_prune; ++i) d.units.emplace_back(layer, scored[i].second);
}

}  // namespace

PruneDecision ilp_select(const Model& model, const MaskRegistry& masks, PruneRates rates,
                         int round) {
  check_rates(rates);
  PruneDecision d{{}, "ilp", round};
  for (int li : model.spec.prunable_layers()) {
    std::vector<std::pair<double, Index>> scored;
    for (Index u : l1_rank(model, masks, li)) scored.emplace_back(0.0, u);
    select_lowest(model.spec, masks, rates, li, scored, d);
  }
  return d;
}

PruneDecision iap_select(const ModelSpec& spec, const ActivationStats& stats,
                         const MaskRegistry& masks, PruneRates rates, int round) {
  check_rates(rates);
  PruneDecision d{{}, "iap", round};
  for (int li : spec.prunable_layers()) {
    std::vector<std::pair<double, Index>> scored;
    for (Index u = 0; u < masks.unit_count(li); ++u)
      if (masks.alive(li, u)) scored.emplace_back(stats.at(li, u), u);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    select_lowest(spec, masks, rates, li, scored, d);
  }
  return d;
}

bool rate_saturated(const ModelSpec& spec, const MaskRegistry& masks, PruneRates rates) {
  for (int li : spec.prunable_layers()) {
    const auto rate = rates.for_class(spec.layers[static_cast<std::size_t>(li)].prune_class);
    if (std::floor(rate * static_cast<double>(masks.alive_count(li))) >= 1.0) return false;
  }
  return true;
}

double aiap_update_threshold(AiapState& state, int round) {
  if (round <= 3) {
    state.threshold = 0.0;
    return state.threshold;
  }
  if (static_cast<int>(state.param_history.size()) < round)
    throw UsageError("aiap_update_threshold: need P[" + std::to_string(round - 2) + "] and P[" +
                     std::to_string(round - 1) + "] in history");
  const auto p0 = static_cast<double>(state.param_history[0]);
  const auto prev2 = static_cast<double>(state.param_history[static_cast<std::size_t>(round - 2)]);
  const auto prev1 = static_cast<double>(state.param_history[static_cast<std::size_t>(round - 1)]);
  const double d = (prev2 - prev1) / p0;
  if (d < 0.01) state.threshold += state.lambda;
  return state.threshold;
}

PruneDecision aiap_select(const ModelSpec& spec, const ActivationStats& stats,
                          const MaskRegistry& masks, const AiapState& state, int round) {
  PruneDecision d{{}, "aiap", round};
  for (int li : spec.prunable_layers()) {
    std::vector<Index> below;
    Index best_unit = -1;
    double best_mean = -1.0;
    Index alive = 0;
    for (Index u = 0; u < masks.unit_count(li); ++u) {
      if (!masks.alive(li, u)) continue;
      ++alive;
      const double mean = stats.at(li, u);
      if (mean > best_mean) {
        best_mean = mean;
        best_unit = u;
      }
      if (mean <= state.threshold) below.push_back(u);
    }
    if (static_cast<Index>(below.size()) == alive)  // keep the strongest unit
      below.erase(std::find(below.begin(), below.end(), best_unit));
    for (Index u : below) d.units.emplace_back(li, u);
  }
  return d;
}

bool aiap_saturated(const ModelSpec& spec, const MaskRegistry& masks) {
  for (int li : spec.prunable_layers())
    if (masks.alive_count(li) > 1) return false;
  return true;
}

}  // namespace sprune
