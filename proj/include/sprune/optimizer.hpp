#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sprune/tensor.hpp"

namespace sprune {

// ---------------------------------------------------------------------------
// learning-rate schedules
// ---------------------------------------------------------------------------

/// One piece of a piecewise schedule over epoch intervals [t_begin, t_end).
/// A warmup piece ramps linearly as value * t / warmup_den.
struct LrSegment {
  int t_begin = 0;
  int t_end = 0;
  double value = 0.0;
  bool warmup = false;
  int warmup_den = 1;
};

/// Piecewise-constant learning rate with optional linear warmup pieces.
/// at(t) is a pure function of t; rewinding is just querying an earlier t.
class LrSchedule {
 public:
  LrSchedule() = default;
  explicit LrSchedule(std::vector<LrSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw UsageError("LrSchedule: no segments");
    int at = segments_.front().t_begin;
    for (const auto& s : segments_) {
      if (s.t_begin != at || s.t_end <= s.t_begin)
        throw UsageError("LrSchedule: segments must be contiguous half-open intervals");
      at = s.t_end;
    }
  }

  static LrSchedule constant(double rate, int epochs) {
    return LrSchedule({LrSegment{0, epochs, rate, false, 1}});
  }

  /// Parses the textual form used in config files, e.g.
  ///   "0.0012 @ [0,6)"
  ///   "0.4*t/8 @ [0,8), 0.4 @ [8,30), 0.04 @ [30,60)"
  static LrSchedule parse(const std::string& text);

  double at(int epoch) const {
    if (epoch < segments_.front().t_begin || epoch >= segments_.back().t_end)
      throw UsageError("lr_at: epoch " + std::to_string(epoch) + " outside [" +
                       std::to_string(segments_.front().t_begin) + ", " +
                       std::to_string(segments_.back().t_end) + ")");
    for (const auto& s : segments_)
      if (epoch < s.t_end)
        return s.warmup ? s.value * static_cast<double>(epoch) / s.warmup_den : s.value;
    return segments_.back().value;  // unreachable
  }

  int horizon() const { return segments_.back().t_end; }
  const std::vector<LrSegment>& segments() const { return segments_; }
  std::string to_string() const;

 private:
  std::vector<LrSegment> segments_;
};

inline double lr_at(const LrSchedule& s, int epoch) { return s.at(epoch); }

// ---------------------------------------------------------------------------
// optimizers
// ---------------------------------------------------------------------------

enum class OptimizerKind { nadam, nsgd };

template <typename S>
struct OptimizerHyper {
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S momentum = S(0.9);
  S weight_decay = S(0);
};

/// Slot state for one optimizer over an aligned list of parameter tensors.
/// NAdam uses both moment lists; Nesterov SGD uses m as the velocity.
template <typename S>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::nadam;
  OptimizerHyper<S> hyper;
  std::int64_t step = 0;
  std::vector<Tensor<S>> m;
  std::vector<Tensor<S>> v;

  static OptimizerState make(OptimizerKind kind, const std::vector<const Tensor<S>*>& params,
                             OptimizerHyper<S> hyper) {
    OptimizerState st;
    st.kind = kind;
    st.hyper = hyper;
    for (const auto* p : params) {
      st.m.emplace_back(p->shape());
      if (kind == OptimizerKind::nadam) st.v.emplace_back(p->shape());
    }
    return st;
  }

  void reset() {
    step = 0;
    for (auto& t : m) t.fill(S(0));
    for (auto& t : v) t.fill(S(0));
  }
};

template <typename S>
void check_step_args(const std::vector<Tensor<S>*>& params,
                     const std::vector<const Tensor<S>*>& grads, const OptimizerState<S>& st,
                     S lr) {
  if (lr <= S(0)) throw UsageError("optimizer step: lr must be positive");
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw DimensionError("optimizer step: param/grad/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(st.m[i]))
      throw DimensionError("optimizer step: shape mismatch at parameter " + std::to_string(i));
    if (!grads[i]->all_finite())
      throw NumericError("optimizer step: non-finite gradient at parameter " + std::to_string(i));
  }
}

/// Nesterov-momentum Adam with bias correction:
///   m <- b1*m + (1-b1)*g            v <- b2*v + (1-b2)*g^2
///   mhat = m / (1 - b1^(t+1))       ghat = g / (1 - b1^t)
///   mbar = b1*mhat + (1-b1)*ghat    vhat = v / (1 - b2^t)
///   w <- w - lr * mbar / (sqrt(vhat) + eps)
/// with t the 1-based step count and weight decay folded into g up front.
template <typename S>
void nadam_step(const std::vector<Tensor<S>*>& params, const std::vector<const Tensor<S>*>& grads,
                OptimizerState<S>& st, S lr) {
  check_step_args(params, grads, st, lr);
  st.step += 1;
  const auto& h = st.hyper;
  const double t = static_cast<double>(st.step);
  const S m_corr = S(1) - static_cast<S>(std::pow(static_cast<double>(h.beta1), t + 1));
  const S g_corr = S(1) - static_cast<S>(std::pow(static_cast<double>(h.beta1), t));
  const S v_corr = S(1) - static_cast<S>(std::pow(static_cast<double>(h.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->array();
    auto m = st.m[i].array();
    auto v = st.v[i].array();
    Eigen::Array<S, Eigen::Dynamic, 1> g = grads[i]->array();
    if (h.weight_decay != S(0)) g += h.weight_decay * w;
    m = h.beta1 * m + (S(1) - h.beta1) * g;
    v = h.beta2 * v + (S(1) - h.beta2) * g.square();
    w -= lr * (h.beta1 * (m / m_corr) + (S(1) - h.beta1) * (g / g_corr)) /
         ((v / v_corr).sqrt() + h.eps);
  }
}

/// Nesterov SGD:  vel <- mu*vel + g;  w <- w - lr*(g + mu*vel)
/// with weight decay folded into g up front. mu = 0 gives plain SGD.
template <typename S>
void nsgd_step(const std::vector<Tensor<S>*>& params, const std::vector<const Tensor<S>*>& grads,
               OptimizerState<S>& st, S lr) {
  check_step_args(params, grads, st, lr);
  st.step += 1;
  const auto& h = st.hyper;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->array();
    auto vel = st.m[i].array();
    Eigen::Array<S, Eigen::Dynamic, 1> g = grads[i]->array();
    if (h.weight_decay != S(0)) g += h.weight_decay * w;
    vel = h.momentum * vel + g;
    w -= lr * (g + h.momentum * vel);
  }
}

template <typename S>
void optimizer_step(const std::vector<Tensor<S>*>& params,
                    const std::vector<const Tensor<S>*>& grads, OptimizerState<S>& st, S lr) {
  if (st.kind == OptimizerKind::nadam)
    nadam_step(params, grads, st, lr);
  else
    nsgd_step(params, grads, st, lr);
}

}  // namespace sprune
