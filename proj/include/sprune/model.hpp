#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sprune/autodiff.hpp"
#include "sprune/dataset.hpp"
#include "sprune/tensor.hpp"

namespace sprune {

enum class LayerKind { dense, conv2d, relu, maxpool, flatten };
enum class PruneClass { none, dense, conv };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Index in = 0;       // dense: input features; conv: input channels
  Index out = 0;      // dense: output units;   conv: filters
  Index kernel = 0;   // conv / maxpool window
  Index stride = 1;
  Index pad = 0;
  bool prunable = false;
  PruneClass prune_class = PruneClass::none;

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  /// Weight elements belonging to one output unit (neuron row / filter slice).
  Index unit_weight_elems() const {
    return kind == LayerKind::conv2d ? in * kernel * kernel : in;
  }
};

struct ModelSpec {
  std::string id;
  Shape input_chw;  // per-example shape {c, h, w}
  std::vector<LayerSpec> layers;

  Index param_count() const;
  /// Indices of layers that carry prunable units, in order.
  std::vector<int> prunable_layers() const;
  void validate() const;
};

struct LayerParams {
  Tensor<float> w, b;
  bool present() const { return w.size() > 0; }
};

struct Model {
  ModelSpec spec;
  std::vector<LayerParams> params;  // aligned with spec.layers

  std::vector<Tensor<float>*> param_tensors();
  std::vector<const Tensor<float>*> param_tensors() const;
  /// Stable names aligned with param_tensors(): "layer3.w", "layer3.b", ...
  std::vector<std::string> param_names() const;
};

/// Kaiming-uniform (fan-in) initialization; weights drawn from the model's
/// init stream, biases zero. Identical seed gives bit-identical parameters.
Model build_model(const ModelSpec& spec, std::uint64_t master_seed);

ModelSpec lenet300_spec();
ModelSpec lenet5_spec();
Model build_lenet300(std::uint64_t master_seed);
Model build_lenet5(std::uint64_t master_seed);
ModelSpec model_spec_by_id(const std::string& id);

/// Post-ReLU activations of prunable layers, keyed by layer index.
struct ForwardCapture {
  std::map<int, Tensor<float>> activations;
};

/// Inference pass without gradient recording; optionally captures the
/// activation tensors the pruning policies consume.
Tensor<float> forward_eval(const Model& model, const Tensor<float>& batch,
                           ForwardCapture* capture = nullptr);

/// Training pass under a tape. Parameters are pushed as leaves in
/// param_tensors() order and their Vars returned through param_vars.
Var<float> forward_train(Tape<float>& tape, const Model& model, Var<float> input,
                         std::vector<Var<float>>& param_vars);

/// Top-1 accuracy in percent over a dataset split.
double evaluate_top1(const Model& model, const Dataset& ds, Index eval_batch = 500);

}  // namespace sprune
