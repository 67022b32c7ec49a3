#include "sprune/metrics.hpp"

#include <cmath>
#include <limits>

#include "sprune/errors.hpp"

namespace sprune {

namespace {

std::string layer_name(const LayerSpec& l, int index) {
  const char* kind = "";
  switch (l.kind) {
    case LayerKind::dense: kind = "dense"; break;
    case LayerKind::conv2d: kind = "conv"; break;
    case LayerKind::relu: kind = "relu"; break;
    case LayerKind::maxpool: kind = "maxpool"; break;
    case LayerKind::flatten: kind = "flatten"; break;
  }
  return std::string(kind) + std::to_string(index);
}

Index alive_units(const ModelSpec& spec, const MaskRegistry& masks, int layer) {
  const auto& l = spec.layers[static_cast<std::size_t>(layer)];
  return l.prunable && masks.tracks(layer) ? masks.alive_count(layer) : l.out;
}

}  // namespace

FootprintReport count_params(const ModelSpec& spec, const MaskRegistry& masks) {
  FootprintReport rep;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.has_params()) continue;
    const Index alive = alive_units(spec, masks, static_cast<int>(i));
    const std::int64_t count = alive * (l.unit_weight_elems() + 1);
    rep.per_layer.push_back({static_cast<int>(i), layer_name(l, static_cast<int>(i)), count});
    rep.total += count;
    rep.original += l.out * (l.unit_weight_elems() + 1);
  }
  rep.compression = rep.total > 0 ? static_cast<double>(rep.original) / rep.total
                                  : std::numeric_limits<double>::infinity();
  rep.remaining_pct = 100.0 * static_cast<double>(rep.total) / static_cast<double>(rep.original);
  return rep;
}

FlopReport count_flops(const ModelSpec& spec, const MaskRegistry& masks, bool cascade) {
  FlopReport rep;
  // `active` is the surviving feature/channel count flowing forward;
  // spatial dims collapse to 1x1 after a dense layer
  Index h = spec.input_chw[1], w = spec.input_chw[2];
  Index active = spec.input_chw[0];
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    std::int64_t flops = 0;
    switch (l.kind) {
      case LayerKind::dense: {
        const Index out_alive = alive_units(spec, masks, static_cast<int>(i));
        const Index in_eff = cascade ? active * h * w : l.in;
        flops = 2 * out_alive * in_eff;
        rep.mac_flops += flops;
        active = out_alive;
        h = w = 1;
        break;
      }
      case LayerKind::conv2d: {
        const Index out_alive = alive_units(spec, masks, static_cast<int>(i));
        const Index cin_eff = cascade ? active : l.in;
        h = conv_out_dim(h, l.kernel, l.stride, l.pad);
        w = conv_out_dim(w, l.kernel, l.stride, l.pad);
        flops = 2 * out_alive * cin_eff * l.kernel * l.kernel * h * w;
        rep.mac_flops += flops;
        active = out_alive;
        break;
      }
      case LayerKind::relu:
        flops = active * h * w;
        rep.elementwise += flops;
        break;
      case LayerKind::maxpool:
        h = (h - l.kernel) / l.stride + 1;
        w = (w - l.kernel) / l.stride + 1;
        flops = active * h * w;
        rep.elementwise += flops;
        break;
      case LayerKind::flatten:
        break;  // free; the consumer folds the spatial dims back in
    }
    rep.per_layer.push_back({static_cast<int>(i), layer_name(l, static_cast<int>(i)), flops});
    rep.total += flops;
  }
  return rep;
}

StabilityReport stability(const Model& pruned, const Model& original, const MaskRegistry& masks) {
  if (pruned.spec.layers.size() != original.spec.layers.size())
    throw IntegrityError("stability: different architectures");
  double acc = 0;
  for (std::size_t i = 0; i < pruned.spec.layers.size(); ++i) {
    const auto& l = pruned.spec.layers[i];
    if (!l.has_params()) continue;
    const auto& pw = pruned.params[i].w;
    const auto& ow = original.params[i].w;
    const auto& pb = pruned.params[i].b;
    const auto& ob = original.params[i].b;
    if (!pw.same_shape(ow) || !pb.same_shape(ob))
      throw IntegrityError("stability: shape mismatch at layer " + std::to_string(i));
    const bool tracked = l.prunable && masks.tracks(static_cast<int>(i));
    const Index slice = l.unit_weight_elems();
    for (Index u = 0; u < l.out; ++u) {
      if (tracked && !masks.alive(static_cast<int>(i), u)) continue;
      for (Index j = 0; j < slice; ++j) {
        const double d = static_cast<double>(pw[u * slice + j]) - ow[u * slice + j];
        acc += d * d;
      }
      const double db = static_cast<double>(pb[u]) - ob[u];
      acc += db * db;
    }
  }
  return {std::sqrt(acc)};
}

CompressionAtDrop compression_at_drop(const std::vector<PruneRoundRecord>& records,
                                      double baseline_acc, double drop) {
  if (records.empty()) throw UsageError("compression_at_drop: no records");
  CompressionAtDrop best;
  for (const auto& r : records) {
    if (r.top1_acc < baseline_acc - drop) continue;
    const double ratio = 100.0 / r.remaining_pct;
    if (!best.qualified || ratio > best.ratio) {
      best.ratio = ratio;
      best.qualified = true;
      best.round = r.round;
    }
  }
  return best;
}

FlopsAtDrop flops_at_drop(const std::vector<PruneRoundRecord>& records, double baseline_acc,
                          double drop) {
  if (records.empty()) throw UsageError("flops_at_drop: no records");
  FlopsAtDrop best;
  for (const auto& r : records) {
    if (r.top1_acc < baseline_acc - drop) continue;
    if (!best.qualified || r.flops < best.flops) {
      best.flops = r.flops;
      best.qualified = true;
      best.round = r.round;
    }
  }
  return best;
}

}  // namespace sprune
