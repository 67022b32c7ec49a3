#include "sprune/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "sprune/errors.hpp"
#include "sprune/rng.hpp"

namespace sprune {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::saturated: return "saturated";
    case RunStatus::max_rounds: return "max_rounds";
    case RunStatus::target_reached: return "target_reached";
  }
  return "?";
}

Checkpoint make_checkpoint(const Model& model, const OptimizerState<float>& opt,
                           const std::mt19937_64& augment_rng, int epoch) {
  Checkpoint c;
  const auto names = model.param_names();
  const auto tensors = model.param_tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) c.params.push_back({names[i], *tensors[i]});
  c.optimizer_kind = opt.kind == OptimizerKind::nadam ? 1 : 2;
  c.optimizer_step = static_cast<std::uint64_t>(opt.step);
  for (std::size_t i = 0; i < opt.m.size(); ++i)
    c.optimizer_tensors.push_back({"m." + names[i], opt.m[i]});
  for (std::size_t i = 0; i < opt.v.size(); ++i)
    c.optimizer_tensors.push_back({"v." + names[i], opt.v[i]});
  c.rng_states.emplace_back("augment", rng_state_to_string(augment_rng));
  c.schedule_pos = static_cast<std::uint32_t>(epoch);
  c.epoch = static_cast<std::uint32_t>(epoch);
  return c;
}

void rewind(Model& model, OptimizerState<float>& opt, std::mt19937_64& augment_rng,
            int& schedule_pos, const Checkpoint& ckpt, RewindMode mode,
            const MaskRegistry& masks) {
  if (mode == RewindMode::weights_lr) {
    const auto names = model.param_names();
    const auto tensors = model.param_tensors();
    if (ckpt.params.size() != tensors.size())
      throw IntegrityError("rewind: checkpoint holds " + std::to_string(ckpt.params.size()) +
                           " tensors, model has " + std::to_string(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (ckpt.params[i].name != names[i] || !ckpt.params[i].value.same_shape(*tensors[i]))
        throw IntegrityError("rewind: mismatch at tensor " + names[i]);
      *tensors[i] = ckpt.params[i].value;
    }
    opt.step = static_cast<std::int64_t>(ckpt.optimizer_step);
    const std::size_t n_m = opt.m.size();
    if (ckpt.optimizer_tensors.size() != n_m + opt.v.size())
      throw IntegrityError("rewind: optimizer state size mismatch");
    for (std::size_t i = 0; i < n_m; ++i) opt.m[i] = ckpt.optimizer_tensors[i].value;
    for (std::size_t i = 0; i < opt.v.size(); ++i)
      opt.v[i] = ckpt.optimizer_tensors[n_m + i].value;
    for (const auto& [name, state] : ckpt.rng_states)
      if (name == "augment") augment_rng = rng_state_from_string(state);
    // pin pruned units: weights stay zero and their moments carry no momentum
    masks.apply_to(model);
    std::vector<Tensor<float>*> mp, vp;
    for (auto& t : opt.m) mp.push_back(&t);
    for (auto& t : opt.v) vp.push_back(&t);
    masks.zero_masked_grads(model, mp);
    if (!vp.empty()) masks.zero_masked_grads(model, vp);
  } else {
    opt.reset();
  }
  schedule_pos = static_cast<int>(ckpt.schedule_pos);
}

Experiment::Experiment(ExperimentConfig cfg, DatasetPair data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  model_ = build_model(model_spec_by_id(cfg_.model), cfg_.seed);
  if (model_.spec.input_chw[0] != data_.train.channels ||
      model_.spec.input_chw[1] != data_.train.height ||
      model_.spec.input_chw[2] != data_.train.width)
    throw ConfigError("model " + cfg_.model + " expects input " +
                      shape_str(model_.spec.input_chw) + ", dataset provides " +
                      shape_str({data_.train.channels, data_.train.height, data_.train.width}));
  masks_ = MaskRegistry::all_alive(model_.spec);
  opt_ = OptimizerState<float>::make(cfg_.optimizer, std::as_const(model_).param_tensors(),
                                     cfg_.hyper());
  augment_rng_ = make_rng(cfg_.seed, SeedPurpose::kAugment);
  plan_ = BatchPlan{cfg_.seed, cfg_.batch_size};
  stats_x_ = stats_batch(data_.train, cfg_.stats_batch_size, cfg_.effective_stats_seed());
  if (cfg_.stats_augment) {
    std::mt19937_64 rng(derive_seed(cfg_.effective_stats_seed(), SeedPurpose::kAugment));
    stats_x_ = augment(stats_x_, rng);
  }
  aiap_.lambda = cfg_.lambda;
}

Experiment Experiment::open(const ExperimentConfig& cfg) {
  const std::string root = cfg.data_dir;
  DatasetPair data = cfg.dataset == "mnist" ? load_mnist(root + "/mnist")
                                            : load_cifar10(root + "/cifar10");
  return Experiment(cfg, std::move(data));
}

void Experiment::train_step(const Tensor<float>& batch, const std::vector<std::int32_t>& labels,
                            double lr) {
  Tape<float> tape;
  Var<float> x = tape.leaf(batch);
  std::vector<Var<float>> pvars;
  Var<float> logits = forward_train(tape, model_, x, pvars);
  Var<float> loss = softmax_xent(tape, logits, labels);
  if (!tape.value(loss).all_finite()) throw NumericError("training diverged: non-finite loss");
  tape.backward(loss);
  std::vector<Tensor<float>*> grad_ptrs;
  grad_ptrs.reserve(pvars.size());
  for (auto v : pvars) grad_ptrs.push_back(&tape.grad(v));
  masks_.zero_masked_grads(model_, grad_ptrs);
  auto params = model_.param_tensors();
  std::vector<const Tensor<float>*> grads(grad_ptrs.begin(), grad_ptrs.end());
  optimizer_step(params, grads, opt_, static_cast<float>(lr));
  masks_.apply_to(model_);
}

void Experiment::train_epoch(int epoch) {
  const double lr = cfg_.schedule.at(epoch);
  const auto order = plan_.epoch_order(epoch, data_.train.n);
  const bool augmented = cfg_.dataset == "cifar10";
  for (Index start = 0; start < data_.train.n; start += cfg_.batch_size) {
    const Index count = std::min(cfg_.batch_size, data_.train.n - start);
    std::span<const std::int32_t> idx(order.data() + start, static_cast<std::size_t>(count));
    Tensor<float> batch = make_batch(data_.train, idx);
    if (augmented) batch = augment(batch, augment_rng_);
    train_step(batch, gather_labels(data_.train, idx), lr);
  }
  schedule_pos_ = epoch + 1;
}

void Experiment::train_range(int first_epoch, int last_epoch) {
  for (int e = first_epoch; e < last_epoch; ++e) train_epoch(e);
}

double Experiment::evaluate() { return evaluate_top1(model_, data_.test); }

PruneRoundRecord Experiment::snapshot_record(int round, double acc, double wall_s,
                                             double threshold) {
  const auto fp = count_params(model_.spec, masks_);
  const auto fl = count_flops(model_.spec, masks_);
  PruneRoundRecord r;
  r.round = round;
  r.remaining_params = fp.total;
  r.remaining_pct = fp.remaining_pct;
  r.flops = fl.total;
  r.top1_acc = acc;
  r.threshold = threshold;
  r.wall_s = wall_s;
  return r;
}

PruneRoundRecord Experiment::train_to_completion(const std::vector<int>& extra_snapshot_epochs) {
  const auto t0 = std::chrono::steady_clock::now();
  std::set<int> snapshots(extra_snapshot_epochs.begin(), extra_snapshot_epochs.end());
  snapshots.insert(cfg_.rewind_epoch);
  for (int e = 0; e <= cfg_.epochs; ++e) {
    if (snapshots.count(e)) {
      Checkpoint c = make_checkpoint(model_, opt_, augment_rng_, e);
      if (e == cfg_.rewind_epoch) rewind_ckpt_ = c;
      extra_ckpts_.emplace_back(e, std::move(c));
    }
    if (e < cfg_.epochs) train_epoch(e);
  }
  round0_final_ = std::make_unique<Model>(model_);
  const double acc = evaluate();
  records_.clear();
  records_.push_back(snapshot_record(0, acc, seconds_since(t0), 0.0));
  aiap_.param_history = {prunable_param_count(model_.spec, masks_)};
  status_ = RunStatus::completed;
  return records_.front();
}

PruneDecision Experiment::select_decision(int round) {
  switch (cfg_.policy) {
    case PolicyKind::ilp:
      return ilp_select(model_, masks_, cfg_.rates(), round);
    case PolicyKind::iap: {
      auto stats = collect_activation_stats(model_, masks_, stats_x_, cfg_.paper_literal_mean);
      return iap_select(model_.spec, stats, masks_, cfg_.rates(), round);
    }
    case PolicyKind::aiap: {
      auto stats = collect_activation_stats(model_, masks_, stats_x_, cfg_.paper_literal_mean);
      return aiap_select(model_.spec, stats, masks_, aiap_, round);
    }
  }
  throw UsageError("unknown policy");
}

bool Experiment::prune_round(int round) {
  if (!rewind_ckpt_) throw UsageError("prune_round: train_to_completion has not run");
  const auto t0 = std::chrono::steady_clock::now();
  double threshold = 0.0;
  if (cfg_.policy == PolicyKind::aiap) threshold = aiap_update_threshold(aiap_, round);

  PruneDecision decision = select_decision(round);
  if (decision.empty()) {
    const bool saturated =
        cfg_.policy == PolicyKind::aiap ? aiap_saturated(model_.spec, masks_) : true;
    if (saturated) {
      status_ = RunStatus::saturated;
      return false;
    }
    // Nothing crossed the threshold this round. Rewinding and retraining the
    // unchanged network would replay the previous round bit for bit (batch
    // order depends only on (seed, epoch)), so carry the result forward.
    PruneRoundRecord rec = records_.back();
    rec.round = round;
    rec.threshold = threshold;
    rec.wall_s = seconds_since(t0);
    records_.push_back(rec);
    aiap_.param_history.push_back(aiap_.param_history.back());
    return true;
  }

  apply_decision(masks_, decision);
  masks_.apply_to(model_);
  rewind(model_, opt_, augment_rng_, schedule_pos_, *rewind_ckpt_, cfg_.rewind_mode, masks_);
  train_range(cfg_.rewind_epoch, cfg_.epochs);
  const double acc = evaluate();
  records_.push_back(snapshot_record(round, acc, seconds_since(t0), threshold));
  aiap_.param_history.push_back(prunable_param_count(model_.spec, masks_));
  return true;
}

const std::vector<PruneRoundRecord>& Experiment::run(const std::string& out_dir) {
  train_to_completion();
  const double baseline = records_.front().top1_acc;
  for (int round = 1;; ++round) {
    if (cfg_.stopping.kind == StoppingRule::Kind::max_rounds &&
        round > static_cast<int>(cfg_.stopping.value)) {
      status_ = RunStatus::max_rounds;
      break;
    }
    if (!prune_round(round)) break;  // saturated
    const auto& rec = records_.back();
    if (cfg_.stopping.kind == StoppingRule::Kind::target_compression &&
        100.0 / rec.remaining_pct >= cfg_.stopping.value) {
      status_ = RunStatus::target_reached;
      break;
    }
    if (cfg_.stopping.kind == StoppingRule::Kind::target_accuracy_drop &&
        baseline - rec.top1_acc >= cfg_.stopping.value) {
      status_ = RunStatus::target_reached;
      break;
    }
  }
  if (!out_dir.empty()) write_artifacts(out_dir);
  return records_;
}

const Checkpoint& Experiment::rewind_checkpoint() const {
  if (!rewind_ckpt_) throw UsageError("no checkpoint: train_to_completion has not run");
  return *rewind_ckpt_;
}

const Model& Experiment::round0_model() const {
  if (!round0_final_) throw UsageError("round-0 model unavailable before training");
  return *round0_final_;
}

std::vector<Experiment::SweepRow> Experiment::sweep_rewind(const std::string& out_dir,
                                                           const std::vector<int>& epochs) {
  for (int e : epochs)
    if (e < 0 || e > cfg_.epochs)
      throw UsageError("sweep_rewind: epoch " + std::to_string(e) + " outside [0, " +
                       std::to_string(cfg_.epochs) + "]");
  train_to_completion(epochs);

  // one fixed decision from the trained model; every rewind epoch retrains
  // exactly the same masked subnetwork
  MaskRegistry fresh = MaskRegistry::all_alive(model_.spec);
  masks_ = fresh;
  PruneDecision decision = select_decision(1);

  std::vector<SweepRow> rows;
  for (int e : epochs) {
    model_ = *round0_final_;
    masks_ = fresh;
    apply_decision(masks_, decision);
    masks_.apply_to(model_);
    const auto it = std::find_if(extra_ckpts_.begin(), extra_ckpts_.end(),
                                 [e](const auto& p) { return p.first == e; });
    if (it == extra_ckpts_.end()) throw UsageError("sweep_rewind: no checkpoint for epoch");
    rewind(model_, opt_, augment_rng_, schedule_pos_, it->second, RewindMode::weights_lr, masks_);
    train_range(e, cfg_.epochs);
    SweepRow row;
    row.epoch = e;
    row.top1 = evaluate();
    row.stability_l2 = stability(model_, *round0_final_, masks_).l2;
    row.remaining_pct = count_params(model_.spec, masks_).remaining_pct;
    rows.push_back(row);
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_sweep_csv(out_dir + "/sweep.csv", rows);
    std::ofstream mf(out_dir + "/manifest.json");
    nlohmann::json j = nlohmann::json::parse(cfg_.to_json_string());
    j["command"] = "sweep-rewind";
    j["baseline_acc"] = records_.front().top1_acc;
    mf << j.dump(2) << "\n";
  }
  return rows;
}

void Experiment::write_artifacts(const std::string& out_dir) const {
  std::filesystem::create_directories(out_dir);
  write_records_csv(out_dir + "/records.csv", records_);
  write_accuracy_svg(out_dir + "/accuracy_vs_params.svg",
                     cfg_.model + " / " + cfg_.dataset + " / " + to_string(cfg_.policy),
                     records_);
  nlohmann::json j = nlohmann::json::parse(cfg_.to_json_string());
  j["status"] = to_string(status_);
  j["rounds"] = records_.empty() ? 0 : records_.back().round;
  j["baseline_acc"] = records_.empty() ? 0.0 : records_.front().top1_acc;
  std::ofstream mf(out_dir + "/manifest.json");
  mf << j.dump(2) << "\n";
  if (rewind_ckpt_)
    save_checkpoint(out_dir + "/ckpt_epoch_" + std::to_string(cfg_.rewind_epoch) + ".iprc",
                    *rewind_ckpt_);
  save_checkpoint(out_dir + "/final.iprc", make_checkpoint(model_, opt_, augment_rng_,
                                                           schedule_pos_));
  nlohmann::json masks_json;
  for (const auto& [layer, mask] : masks_.units) {
    std::vector<int> alive;
    for (std::size_t u = 0; u < mask.size(); ++u)
      if (mask[u]) alive.push_back(static_cast<int>(u));
    masks_json["layer" + std::to_string(layer)] = alive;
  }
  std::ofstream maskf(out_dir + "/masks.json");
  maskf << masks_json.dump(2) << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<Experiment::SweepRow>& rows) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  f << "rewind_epoch,top1_acc,stability_l2,remaining_pct\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%.4f,%.6f,%.6f\n", r.epoch, r.top1, r.stability_l2,
                  r.remaining_pct);
    f << line;
  }
}

}  // namespace sprune
