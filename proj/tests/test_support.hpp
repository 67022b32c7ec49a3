// Test-only oracles: straightforward reference computations kept independent
// of the library's kernel implementations on purpose.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sprune/model.hpp"
#include "sprune/pruning.hpp"
#include "sprune/tensor.hpp"

namespace oracle {

using sprune::Index;
using sprune::Shape;
using sprune::Tensor;

template <typename S>
Tensor<S> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<S> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(dist(rng));
  return t;
}

/// Triple-loop matrix product.
template <typename S>
Tensor<S> naive_matmul(const Tensor<S>& a, const Tensor<S>& b) {
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<S> out({m, n});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      double acc = 0;
      for (Index l = 0; l < k; ++l)
        acc += static_cast<double>(a(i, l)) * static_cast<double>(b(l, j));
      out(i, j) = static_cast<S>(acc);
    }
  return out;
}

/// Direct six-nested-loop cross-correlation.
template <typename S>
Tensor<S> naive_conv2d(const Tensor<S>& x, const Tensor<S>& w, Index stride, Index pad) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), k = w.dim(2);
  const Index oh = (h + 2 * pad - k) / stride + 1;
  const Index ow = (wd + 2 * pad - k) / stride + 1;
  Tensor<S> y({n, cout, oh, ow});
  for (Index i = 0; i < n; ++i)
    for (Index f = 0; f < cout; ++f)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (Index c = 0; c < cin; ++c)
            for (Index ki = 0; ki < k; ++ki)
              for (Index kj = 0; kj < k; ++kj) {
                const Index iy = oy * stride - pad + ki;
                const Index ix = ox * stride - pad + kj;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += static_cast<double>(x(i, c, iy, ix)) * static_cast<double>(w(f, c, ki, kj));
              }
          y(i, f, oy, ox) = static_cast<S>(acc);
        }
  return y;
}

/// Window-scan max pooling.
template <typename S>
Tensor<S> naive_maxpool(const Tensor<S>& x, Index k, Index stride) {
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  Tensor<S> y({n, c, oh, ow});
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          S best = x(i, ch, oy * stride, ox * stride);
          for (Index ki = 0; ki < k; ++ki)
            for (Index kj = 0; kj < k; ++kj)
              best = std::max(best, x(i, ch, oy * stride + ki, ox * stride + kj));
          y(i, ch, oy, ox) = best;
        }
  return y;
}

/// Central finite differences of a scalar-valued function at x.
inline Tensor<double> central_difference(const std::function<double(const Tensor<double>&)>& f,
                                         const Tensor<double>& x, double h = 1e-5) {
  Tensor<double> grad(x.shape());
  Tensor<double> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    probe[i] = v + h;
    const double fp = f(probe);
    probe[i] = v - h;
    const double fm = f(probe);
    probe[i] = v;
    grad[i] = (fp - fm) / (2 * h);
  }
  return grad;
}

inline double max_rel_error(const Tensor<double>& got, const Tensor<double>& want,
                            double floor = 1e-6) {
  double worst = 0;
  for (Index i = 0; i < got.size(); ++i) {
    const double denom = std::max({std::abs(got[i]), std::abs(want[i]), floor});
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  double worst = 0;
  for (Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

/// Brute-force unmasked parameter count: walks every weight element and asks
/// the mask about its unit.
inline std::int64_t enumerate_params(const sprune::ModelSpec& spec,
                                     const sprune::MaskRegistry& masks) {
  std::int64_t count = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.has_params()) continue;
    for (Index u = 0; u < l.out; ++u) {
      const bool alive = !l.prunable || masks.alive(static_cast<int>(i), u);
      if (!alive) continue;
      for (Index j = 0; j < l.unit_weight_elems(); ++j) ++count;
      ++count;  // bias
    }
  }
  return count;
}

/// Brute-force flop count: enumerates every MAC of every surviving unit and
/// every surviving elementwise output, mirroring the documented convention
/// (1 MAC = 2 flops, relu/pool 1 flop per element).
inline std::int64_t enumerate_flops(const sprune::ModelSpec& spec,
                                    const sprune::MaskRegistry& masks, bool cascade) {
  std::int64_t flops = 0;
  Index h = spec.input_chw[1], w = spec.input_chw[2];
  Index active = spec.input_chw[0];
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const int li = static_cast<int>(i);
    switch (l.kind) {
      case sprune::LayerKind::dense: {
        Index alive = 0;
        for (Index u = 0; u < l.out; ++u)
          if (!l.prunable || masks.alive(li, u)) ++alive;
        const Index in_eff = cascade ? active * h * w : l.in;
        for (Index u = 0; u < alive; ++u)
          for (Index j = 0; j < in_eff; ++j) flops += 2;
        active = alive;
        h = w = 1;
        break;
      }
      case sprune::LayerKind::conv2d: {
        Index alive = 0;
        for (Index u = 0; u < l.out; ++u)
          if (!l.prunable || masks.alive(li, u)) ++alive;
        const Index cin_eff = cascade ? active : l.in;
        const Index oh = (h + 2 * l.pad - l.kernel) / l.stride + 1;
        const Index ow = (w + 2 * l.pad - l.kernel) / l.stride + 1;
        for (Index u = 0; u < alive; ++u)
          for (Index c = 0; c < cin_eff; ++c)
            for (Index kk = 0; kk < l.kernel * l.kernel; ++kk) flops += 2 * oh * ow;
        active = alive;
        h = oh;
        w = ow;
        break;
      }
      case sprune::LayerKind::relu:
        flops += active * h * w;
        break;
      case sprune::LayerKind::maxpool:
        h = (h - l.kernel) / l.stride + 1;
        w = (w - l.kernel) / l.stride + 1;
        flops += active * h * w;
        break;
      case sprune::LayerKind::flatten:
        break;
    }
  }
  return flops;
}

/// Small randomly shaped dense/conv model plus a random monotone mask state.
struct RandomToy {
  sprune::ModelSpec spec;
  sprune::MaskRegistry masks;
};

inline RandomToy random_toy_model(std::mt19937_64& rng) {
  using sprune::LayerKind;
  using sprune::LayerSpec;
  using sprune::PruneClass;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<Index> ch(2, 6);
  std::uniform_int_distribution<Index> units(3, 12);
  sprune::ModelSpec spec;
  spec.id = "toy";
  const bool with_conv = coin(rng) == 1;
  Index c = ch(rng);
  spec.input_chw = {c, 8, 8};
  if (with_conv) {
    const Index f1 = units(rng);
    spec.layers.push_back({LayerKind::conv2d, c, f1, 3, 1, 1, true, PruneClass::conv});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::maxpool, 0, 0, 2, 2});
    spec.layers.push_back({LayerKind::flatten});
    c = f1;
    const Index in = f1 * 4 * 4;
    const Index d1 = units(rng);
    spec.layers.push_back({LayerKind::dense, in, d1, 0, 1, 0, true, PruneClass::dense});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::dense, d1, 4});
  } else {
    spec.layers.push_back({LayerKind::flatten});
    const Index in = c * 8 * 8;
    const Index d1 = units(rng), d2 = units(rng);
    spec.layers.push_back({LayerKind::dense, in, d1, 0, 1, 0, true, PruneClass::dense});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::dense, d1, d2, 0, 1, 0, true, PruneClass::dense});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::dense, d2, 4});
  }
  RandomToy toy{spec, sprune::MaskRegistry::all_alive(spec)};
  for (auto& [layer, mask] : toy.masks.units) {
    std::uniform_int_distribution<std::size_t> n_prune(0, mask.size() - 1);
    std::size_t target = n_prune(rng);
    for (std::size_t u = 0; u < target; ++u) mask[u] = 0;  // deterministic prefix prune
    std::shuffle(mask.begin(), mask.end(), rng);
  }
  return toy;
}

}  // namespace oracle
