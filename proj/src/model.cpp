#include "sprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sprune/errors.hpp"
#include "sprune/nn_kernels.hpp"
#include "sprune/rng.hpp"

namespace sprune {

Index ModelSpec::param_count() const {
  Index total = 0;
  for (const auto& l : layers)
    if (l.has_params()) total += l.out * l.unit_weight_elems() + l.out;
  return total;
}

std::vector<int> ModelSpec::prunable_layers() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].prunable) out.push_back(static_cast<int>(i));
  return out;
}

void ModelSpec::validate() const {
  if (layers.empty()) throw UsageError("model " + id + " has no layers");
  int last_param = -1;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].has_params()) last_param = static_cast<int>(i);
  if (last_param < 0) throw UsageError("model " + id + " has no parameter layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.prunable && !l.has_params())
      throw UsageError("layer " + std::to_string(i) + " prunable but has no units");
    if (static_cast<int>(i) == last_param && l.prunable)
      throw UsageError("the final classifier layer must not be prunable");
  }
}

std::vector<Tensor<float>*> Model::param_tensors() {
  std::vector<Tensor<float>*> out;
  for (auto& p : params)
    if (p.present()) {
      out.push_back(&p.w);
      out.push_back(&p.b);
    }
  return out;
}

std::vector<const Tensor<float>*> Model::param_tensors() const {
  std::vector<const Tensor<float>*> out;
  for (const auto& p : params)
    if (p.present()) {
      out.push_back(&p.w);
      out.push_back(&p.b);
    }
  return out;
}

std::vector<std::string> Model::param_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].present()) {
      out.push_back("layer" + std::to_string(i) + ".w");
      out.push_back("layer" + std::to_string(i) + ".b");
    }
  return out;
}

Model build_model(const ModelSpec& spec, std::uint64_t master_seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  m.params.resize(spec.layers.size());
  std::mt19937_64 rng = make_rng(master_seed, SeedPurpose::kInit);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.has_params()) continue;
    // Kaiming-uniform, fan-in mode, with the leaky slope sqrt(5) used by
    // stock framework layers: weight and bias ~ U(-1/sqrt(fan_in), +...)
    const Index fan_in = l.unit_weight_elems();
    const auto bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    Tensor<float> w = l.kind == LayerKind::conv2d
                          ? Tensor<float>({l.out, l.in, l.kernel, l.kernel})
                          : Tensor<float>({l.out, l.in});
    for (Index j = 0; j < w.size(); ++j) w[j] = dist(rng);
    Tensor<float> b({l.out});
    for (Index j = 0; j < l.out; ++j) b[j] = dist(rng);
    m.params[i] = LayerParams{std::move(w), std::move(b)};
  }
  return m;
}

ModelSpec lenet300_spec() {
  ModelSpec s;
  s.id = "lenet300";
  s.input_chw = {1, 28, 28};
  s.layers = {
      {LayerKind::flatten},
      {LayerKind::dense, 784, 300, 0, 1, 0, true, PruneClass::dense},
      {LayerKind::relu},
      {LayerKind::dense, 300, 100, 0, 1, 0, true, PruneClass::dense},
      {LayerKind::relu},
      {LayerKind::dense, 100, 10},
  };
  return s;
}

ModelSpec lenet5_spec() {
  ModelSpec s;
  s.id = "lenet5";
  s.input_chw = {3, 32, 32};
  s.layers = {
      {LayerKind::conv2d, 3, 64, 5, 1, 2, true, PruneClass::conv},
      {LayerKind::relu},
      {LayerKind::maxpool, 0, 0, 2, 2},
      {LayerKind::conv2d, 64, 64, 5, 1, 2, true, PruneClass::conv},
      {LayerKind::relu},
      {LayerKind::maxpool, 0, 0, 2, 2},
      {LayerKind::flatten},
      {LayerKind::dense, 4096, 1024, 0, 1, 0, true, PruneClass::dense},
      {LayerKind::relu},
      {LayerKind::dense, 1024, 10},
  };
  return s;
}

Model build_lenet300(std::uint64_t master_seed) { return build_model(lenet300_spec(), master_seed); }
Model build_lenet5(std::uint64_t master_seed) { return build_model(lenet5_spec(), master_seed); }

ModelSpec model_spec_by_id(const std::string& id) {
  if (id == "lenet300") return lenet300_spec();
  if (id == "lenet5") return lenet5_spec();
  throw UsageError("unknown model id: " + id);
}

Tensor<float> forward_eval(const Model& model, const Tensor<float>& batch,
                           ForwardCapture* capture) {
  if (batch.rank() != 4 || batch.dim(1) != model.spec.input_chw[0] ||
      batch.dim(2) != model.spec.input_chw[1] || batch.dim(3) != model.spec.input_chw[2])
    throw DimensionError("forward: batch " + shape_str(batch.shape()) + " does not match input " +
                         shape_str(model.spec.input_chw));
  Tensor<float> x = batch;
  int last_param_layer = -1;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    switch (l.kind) {
      case LayerKind::dense:
        x = linear(x, model.params[i].w, model.params[i].b);
        last_param_layer = static_cast<int>(i);
        break;
      case LayerKind::conv2d:
        x = bias_channel(conv2d(x, model.params[i].w, l.stride, l.pad), model.params[i].b);
        last_param_layer = static_cast<int>(i);
        break;
      case LayerKind::relu:
        x = relu(x);
        if (capture && last_param_layer >= 0 &&
            model.spec.layers[static_cast<std::size_t>(last_param_layer)].prunable)
          capture->activations[last_param_layer] = x;
        break;
      case LayerKind::maxpool:
        x = maxpool2d(x, l.kernel, l.stride).y;
        break;
      case LayerKind::flatten:
        x = x.reshaped({x.dim(0), x.size() / x.dim(0)});
        break;
    }
  }
  return x;
}

Var<float> forward_train(Tape<float>& tape, const Model& model, Var<float> input,
                         std::vector<Var<float>>& param_vars) {
  param_vars.clear();
  std::vector<std::pair<Var<float>, Var<float>>> layer_vars(model.spec.layers.size());
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i)
    if (model.params[i].present()) {
      Var<float> w = tape.leaf(model.params[i].w);
      Var<float> b = tape.leaf(model.params[i].b);
      layer_vars[i] = {w, b};
      param_vars.push_back(w);
      param_vars.push_back(b);
    }
  Var<float> x = input;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    switch (l.kind) {
      case LayerKind::dense:
        x = linear(tape, x, layer_vars[i].first, layer_vars[i].second);
        break;
      case LayerKind::conv2d:
        x = bias_channel(tape, conv2d(tape, x, layer_vars[i].first, l.stride, l.pad),
                         layer_vars[i].second);
        break;
      case LayerKind::relu:
        x = relu(tape, x);
        break;
      case LayerKind::maxpool:
        x = maxpool2d(tape, x, l.kernel, l.stride);
        break;
      case LayerKind::flatten:
        x = flatten(tape, x);
        break;
    }
  }
  return x;
}

double evaluate_top1(const Model& model, const Dataset& ds, Index eval_batch) {
  Index correct = 0;
  std::vector<std::int32_t> idx;
  for (Index start = 0; start < ds.n; start += eval_batch) {
    const Index count = std::min(eval_batch, ds.n - start);
    idx.resize(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(start + i);
    Tensor<float> batch = make_batch(ds, idx);
    Tensor<float> logits = forward_eval(model, batch);
    const Index classes = logits.dim(1);
    for (Index i = 0; i < count; ++i) {
      const float* row = logits.data() + i * classes;
      const Index pred = std::max_element(row, row + classes) - row;
      if (pred == ds.labels[static_cast<std::size_t>(start + i)]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(ds.n);
}

}  // namespace sprune
