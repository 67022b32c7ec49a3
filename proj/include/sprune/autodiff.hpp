#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "sprune/nn_kernels.hpp"
#include "sprune/tensor.hpp"

namespace sprune {

template <typename Scalar>
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Wengert list: forward values plus backward closures, replayed in exact
/// reverse order of recording. Gradients accumulate additively, so a value
/// feeding several consumers receives the sum of their contributions.
template <typename Scalar>
class Tape {
 public:
  Var<Scalar> leaf(Tensor<Scalar> value) {
    values_.push_back(std::move(value));
    return {static_cast<std::int32_t>(values_.size()) - 1};
  }

  Var<Scalar> record(Tensor<Scalar> value, std::function<void(Tape&)> pull) {
    Var<Scalar> v = leaf(std::move(value));
    ops_.push_back(std::move(pull));
    return v;
  }

  const Tensor<Scalar>& value(Var<Scalar> v) const { return values_[idx(v)]; }
  Tensor<Scalar>& value(Var<Scalar> v) { return values_[idx(v)]; }

  /// Valid after backward(); zero tensor for values the loss never reached.
  const Tensor<Scalar>& grad(Var<Scalar> v) const { return grads_[idx(v)]; }
  Tensor<Scalar>& grad(Var<Scalar> v) { return grads_[idx(v)]; }

  void backward(Var<Scalar> loss) {
    if (!loss.valid() || value(loss).size() != 1)
      throw UsageError("backward: root must be a scalar value on this tape");
    grads_.clear();
    grads_.reserve(values_.size());
    for (const auto& v : values_) grads_.emplace_back(v.shape());
    grads_[idx(loss)][0] = Scalar(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
  }

  void clear() {
    values_.clear();
    grads_.clear();
    ops_.clear();
  }

  std::size_t num_values() const { return values_.size(); }
  std::size_t num_ops() const { return ops_.size(); }

 private:
  static std::size_t idx(Var<Scalar> v) { return static_cast<std::size_t>(v.id); }

  std::vector<Tensor<Scalar>> values_;
  std::vector<Tensor<Scalar>> grads_;
  std::vector<std::function<void(Tape&)>> ops_;
};

// ---------------------------------------------------------------------------
// recorded ops
// ---------------------------------------------------------------------------

template <typename S>
Var<S> matmul(Tape<S>& t, Var<S> a, Var<S> b) {
  Tensor<S> y = matmul(t.value(a), t.value(b));
  return t.record(std::move(y), [a, b, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    const auto& dy = tp.grad(o);
    const auto& av = tp.value(a);
    const auto& bv = tp.value(b);
    const Index m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    tp.grad(a).mat(m, k).noalias() += dy.mat(m, n) * bv.mat(k, n).transpose();
    tp.grad(b).mat(k, n).noalias() += av.mat(m, k).transpose() * dy.mat(m, n);
  });
}

template <typename S>
Var<S> linear(Tape<S>& t, Var<S> x, Var<S> w, Var<S> b) {
  Tensor<S> y = linear(t.value(x), t.value(w), t.value(b));
  return t.record(std::move(y), [x, w, b, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    auto g = linear_backward(tp.value(x), tp.value(w), tp.grad(o));
    tp.grad(x).array() += g.dx.array();
    tp.grad(w).array() += g.dw.array();
    tp.grad(b).array() += g.db.array();
  });
}

template <typename S>
Var<S> conv2d(Tape<S>& t, Var<S> x, Var<S> w, Index stride, Index pad) {
  Tensor<S> y = conv2d(t.value(x), t.value(w), stride, pad);
  return t.record(std::move(y), [x, w, stride, pad, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    auto g = conv2d_backward(tp.value(x), tp.value(w), tp.grad(o), stride, pad);
    tp.grad(x).array() += g.dx.array();
    tp.grad(w).array() += g.dw.array();
  });
}

template <typename S>
Var<S> bias_channel(Tape<S>& t, Var<S> x, Var<S> b) {
  Tensor<S> y = bias_channel(t.value(x), t.value(b));
  return t.record(std::move(y), [x, b, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(x).array() += tp.grad(o).array();
    tp.grad(b).array() += bias_channel_backward(tp.grad(o)).array();
  });
}

template <typename S>
Var<S> relu(Tape<S>& t, Var<S> x) {
  Tensor<S> y = relu(t.value(x));
  return t.record(std::move(y), [x, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(x).array() += relu_backward(tp.value(x), tp.grad(o)).array();
  });
}

template <typename S>
Var<S> maxpool2d(Tape<S>& t, Var<S> x, Index k, Index stride) {
  auto r = maxpool2d(t.value(x), k, stride);
  return t.record(std::move(r.y),
                  [x, argmax = std::move(r.argmax), out = t.num_values()](Tape<S>& tp) {
                    Var<S> o{static_cast<std::int32_t>(out)};
                    auto dx = maxpool2d_backward<S>(tp.value(x).shape(), argmax, tp.grad(o));
                    tp.grad(x).array() += dx.array();
                  });
}

template <typename S>
Var<S> flatten(Tape<S>& t, Var<S> x) {
  const auto& xv = t.value(x);
  Tensor<S> y = xv.reshaped({xv.dim(0), xv.size() / xv.dim(0)});
  return t.record(std::move(y), [x, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(x).array() += tp.grad(o).array();
  });
}

template <typename S>
Var<S> softmax_xent(Tape<S>& t, Var<S> logits, std::vector<std::int32_t> labels) {
  auto r = softmax_xent(t.value(logits), labels);
  Tensor<S> loss = Tensor<S>::scalar(r.loss);
  return t.record(std::move(loss), [logits, probs = std::move(r.probs),
                                    labels = std::move(labels), out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    auto d = softmax_xent_backward(probs, labels, tp.grad(o)[0]);
    tp.grad(logits).array() += d.array();
  });
}

template <typename S>
Var<S> sum(Tape<S>& t, Var<S> x) {
  Tensor<S> y = Tensor<S>::scalar(t.value(x).array().sum());
  return t.record(std::move(y), [x, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(x).array() += tp.grad(o)[0];
  });
}

template <typename S>
Var<S> square(Tape<S>& t, Var<S> x) {
  Tensor<S> y = t.value(x);
  y.array() = y.array().square();
  return t.record(std::move(y), [x, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(x).array() += S(2) * tp.value(x).array() * tp.grad(o).array();
  });
}

template <typename S>
Var<S> add(Tape<S>& t, Var<S> a, Var<S> b) {
  if (!t.value(a).same_shape(t.value(b))) throw DimensionError("add: shape mismatch");
  Tensor<S> y = t.value(a);
  y.array() += t.value(b).array();
  return t.record(std::move(y), [a, b, out = t.num_values()](Tape<S>& tp) {
    Var<S> o{static_cast<std::int32_t>(out)};
    tp.grad(a).array() += tp.grad(o).array();
    tp.grad(b).array() += tp.grad(o).array();
  });
}

}  // namespace sprune
