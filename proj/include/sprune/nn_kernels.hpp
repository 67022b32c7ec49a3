#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "sprune/tensor.hpp"

namespace sprune {

inline Index conv_out_dim(Index in, Index k, Index stride, Index pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<S> out({a.dim(0), b.dim(1)});
  out.mat(a.dim(0), b.dim(1)).noalias() = a.mat(a.dim(0), a.dim(1)) * b.mat(b.dim(0), b.dim(1));
  return out;
}

// ---------------------------------------------------------------------------
// linear: y[b x out] = x[b x in] * W[out x in]^T + bias[out]
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw DimensionError("linear: x " + shape_str(x.shape()) + " vs W " + shape_str(w.shape()));
  if (bias.size() != w.dim(0))
    throw DimensionError("linear: bias size " + std::to_string(bias.size()));
  const Index n = x.dim(0), in = x.dim(1), out = w.dim(0);
  Tensor<S> y({n, out});
  auto ym = y.mat(n, out);
  ym.noalias() = x.mat(n, in) * w.mat(out, in).transpose();
  ym.rowwise() += bias.mat(1, out).row(0);
  return y;
}

template <typename S>
struct LinearGrads {
  Tensor<S> dx, dw, db;
};

template <typename S>
LinearGrads<S> linear_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy) {
  const Index n = x.dim(0), in = x.dim(1), out = w.dim(0);
  LinearGrads<S> g{Tensor<S>({n, in}), Tensor<S>({out, in}), Tensor<S>({out})};
  g.dx.mat(n, in).noalias() = dy.mat(n, out) * w.mat(out, in);
  g.dw.mat(out, in).noalias() = dy.mat(n, out).transpose() * x.mat(n, in);
  g.db.mat(1, out).row(0) = dy.mat(n, out).colwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, square kernel, symmetric stride/pad)
// ---------------------------------------------------------------------------

template <typename S>
void check_conv_geometry(const Tensor<S>& x, const Tensor<S>& w, Index stride, Index pad) {
  if (x.rank() != 4 || w.rank() != 4)
    throw DimensionError("conv2d: need 4-d input and filters, got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
  if (w.dim(2) != w.dim(3)) throw DimensionError("conv2d: kernel must be square");
  if (x.dim(1) != w.dim(1))
    throw DimensionError("conv2d: input channels " + std::to_string(x.dim(1)) +
                         " vs filter channels " + std::to_string(w.dim(1)));
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (pad < 0) throw DimensionError("conv2d: negative padding");
  const Index k = w.dim(2);
  if (k > x.dim(2) + 2 * pad || k > x.dim(3) + 2 * pad)
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                         shape_str(x.shape()));
}

/// Unpack one image [cin x h x w] into columns [cin*k*k x oh*ow].
template <typename S>
void im2col(const S* img, Index cin, Index h, Index w, Index k, Index stride, Index pad,
            Index oh, Index ow, S* cols) {
  for (Index c = 0; c < cin; ++c) {
    const S* plane = img + c * h * w;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        S* row = cols + ((c * k + ki) * k + kj) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * ow, row + (oy + 1) * ow, S(0));
            continue;
          }
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kj;
            row[oy * ow + ox] = (ix >= 0 && ix < w) ? plane[iy * w + ix] : S(0);
          }
        }
      }
    }
  }
}

/// Scatter-add columns back into an image-shaped gradient.
template <typename S>
void col2im(const S* cols, Index cin, Index h, Index w, Index k, Index stride, Index pad,
            Index oh, Index ow, S* img) {
  for (Index c = 0; c < cin; ++c) {
    S* plane = img + c * h * w;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const S* row = cols + ((c * k + ki) * k + kj) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, Index stride, Index pad) {
  check_conv_geometry(x, w, stride, pad);
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), k = w.dim(2);
  const Index oh = conv_out_dim(h, k, stride, pad), ow = conv_out_dim(wd, k, stride, pad);
  Tensor<S> y({n, cout, oh, ow});
  Tensor<S> cols({cin * k * k, oh * ow});
  auto wm = w.mat(cout, cin * k * k);
  for (Index i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * wd, cin, h, wd, k, stride, pad, oh, ow, cols.data());
    typename Tensor<S>::MatrixMap(y.data() + i * cout * oh * ow, cout, oh * ow).noalias() =
        wm * cols.mat(cin * k * k, oh * ow);
  }
  return y;
}

template <typename S>
struct ConvGrads {
  Tensor<S> dx, dw;
};

template <typename S>
ConvGrads<S> conv2d_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy,
                             Index stride, Index pad) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), k = w.dim(2);
  const Index oh = dy.dim(2), ow = dy.dim(3);
  ConvGrads<S> g{Tensor<S>(x.shape()), Tensor<S>(w.shape())};
  Tensor<S> cols({cin * k * k, oh * ow});
  Tensor<S> dcols({cin * k * k, oh * ow});
  auto wm = w.mat(cout, cin * k * k);
  auto dwm = g.dw.mat(cout, cin * k * k);
  for (Index i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * wd, cin, h, wd, k, stride, pad, oh, ow, cols.data());
    typename Tensor<S>::ConstMatrixMap dym(dy.data() + i * cout * oh * ow, cout, oh * ow);
    dwm.noalias() += dym * cols.mat(cin * k * k, oh * ow).transpose();
    dcols.mat(cin * k * k, oh * ow).noalias() = wm.transpose() * dym;
    col2im(dcols.data(), cin, h, wd, k, stride, pad, oh, ow, g.dx.data() + i * cin * h * wd);
  }
  return g;
}

// ---------------------------------------------------------------------------
// per-channel bias over [n x c x h x w]
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> bias_channel(const Tensor<S>& x, const Tensor<S>& bias) {
  if (x.rank() != 4 || bias.size() != x.dim(1))
    throw DimensionError("bias_channel: " + shape_str(x.shape()) + " with bias " +
                         shape_str(bias.shape()));
  Tensor<S> y = x;
  const Index n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      S* p = y.data() + (i * c + ch) * hw;
      const S b = bias[ch];
      for (Index j = 0; j < hw; ++j) p[j] += b;
    }
  return y;
}

template <typename S>
Tensor<S> bias_channel_backward(const Tensor<S>& dy) {
  const Index n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
  Tensor<S> db({c});
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      const S* p = dy.data() + (i * c + ch) * hw;
      S acc = 0;
      for (Index j = 0; j < hw; ++j) acc += p[j];
      db[ch] += acc;
    }
  return db;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> y = x;
  y.array() = y.array().max(S(0));
  return y;
}

/// Gradient passes only where the input was strictly positive.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx = dy;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] <= S(0)) dx[i] = S(0);
  return dx;
}

// ---------------------------------------------------------------------------
// maxpool2d
// ---------------------------------------------------------------------------

template <typename S>
struct MaxPoolResult {
  Tensor<S> y;
  std::vector<Index> argmax;  // flat index into the input plane per output element
};

template <typename S>
MaxPoolResult<S> maxpool2d(const Tensor<S>& x, Index k, Index stride) {
  if (x.rank() != 4) throw DimensionError("maxpool2d: need 4-d input");
  if (k < 1 || stride < 1 || k > x.dim(2) || k > x.dim(3))
    throw DimensionError("maxpool2d: window " + std::to_string(k) + " does not fit " +
                         shape_str(x.shape()));
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  MaxPoolResult<S> r{Tensor<S>({n, c, oh, ow}), {}};
  r.argmax.resize(static_cast<std::size_t>(n * c * oh * ow));
  Index out_i = 0;
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      const S* plane = x.data() + (i * c + ch) * h * w;
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          S best = -std::numeric_limits<S>::infinity();
          Index best_at = 0;
          for (Index ki = 0; ki < k; ++ki)
            for (Index kj = 0; kj < k; ++kj) {
              const Index at = (oy * stride + ki) * w + (ox * stride + kj);
              if (plane[at] > best) {  // strict: first occurrence wins ties
                best = plane[at];
                best_at = at;
              }
            }
          r.y[out_i] = best;
          r.argmax[static_cast<std::size_t>(out_i)] = best_at;
          ++out_i;
        }
    }
  return r;
}

template <typename S>
Tensor<S> maxpool2d_backward(const Shape& x_shape, const std::vector<Index>& argmax,
                             const Tensor<S>& dy) {
  Tensor<S> dx(x_shape);
  const Index n = x_shape[0], c = x_shape[1], hw = x_shape[2] * x_shape[3];
  const Index per_plane = dy.dim(2) * dy.dim(3);
  Index out_i = 0;
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      S* plane = dx.data() + (i * c + ch) * hw;
      for (Index j = 0; j < per_plane; ++j, ++out_i)
        plane[argmax[static_cast<std::size_t>(out_i)]] += dy[out_i];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// softmax cross-entropy
// ---------------------------------------------------------------------------

/// Row-wise softmax with max subtraction.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& logits) {
  const Index n = logits.dim(0), c = logits.dim(1);
  Tensor<S> probs = logits;
  auto m = probs.mat(n, c);
  for (Index i = 0; i < n; ++i) {
    auto row = m.row(i);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return probs;
}

template <typename S>
struct XentResult {
  S loss;             // mean over the batch
  Tensor<S> probs;    // saved softmax for the backward pass
};

template <typename S>
XentResult<S> softmax_xent(const Tensor<S>& logits, const std::vector<std::int32_t>& labels) {
  if (logits.rank() != 2) throw DimensionError("softmax_xent: logits must be 2-d");
  const Index n = logits.dim(0), c = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(n));
  for (std::int32_t l : labels)
    if (l < 0 || l >= c)
      throw UsageError("softmax_xent: label " + std::to_string(l) + " outside [0, " +
                       std::to_string(c) + ")");
  XentResult<S> r{S(0), logits};
  auto m = r.probs.mat(n, c);
  double acc = 0;
  for (Index i = 0; i < n; ++i) {
    auto row = m.row(i);
    const S mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    const S denom = row.sum();
    acc += -std::log(static_cast<double>(row[labels[static_cast<std::size_t>(i)]] / denom));
    row /= denom;
  }
  r.loss = static_cast<S>(acc / static_cast<double>(n));
  return r;
}

/// dL/dlogits given the saved softmax and upstream scalar gradient.
template <typename S>
Tensor<S> softmax_xent_backward(const Tensor<S>& probs, const std::vector<std::int32_t>& labels,
                                S upstream) {
  const Index n = probs.dim(0), c = probs.dim(1);
  Tensor<S> d = probs;
  const S scale = upstream / static_cast<S>(n);
  auto m = d.mat(n, c);
  for (Index i = 0; i < n; ++i) {
    m(i, labels[static_cast<std::size_t>(i)]) -= S(1);
    m.row(i) *= scale;
  }
  return d;
}

}  // namespace sprune
