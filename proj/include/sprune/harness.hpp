#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sprune/checkpoint.hpp"
#include "sprune/config.hpp"
#include "sprune/dataset.hpp"
#include "sprune/metrics.hpp"
#include "sprune/model.hpp"
#include "sprune/pruning.hpp"
#include "sprune/records.hpp"

namespace sprune {

enum class RunStatus { completed, saturated, max_rounds, target_reached };
std::string to_string(RunStatus s);

/// Snapshot taken at an epoch boundary, restored by rewinding.
Checkpoint make_checkpoint(const Model& model, const OptimizerState<float>& opt,
                           const std::mt19937_64& augment_rng, int epoch);

/// weights+lr: surviving weights and the optimizer return bit-exactly to
/// their epoch-k values, masked entries stay zero, the augment stream and
/// schedule position are restored. lr-only: parameters and moments are left
/// alone except the moments are zeroed; only the schedule rewinds.
void rewind(Model& model, OptimizerState<float>& opt, std::mt19937_64& augment_rng,
            int& schedule_pos, const Checkpoint& ckpt, RewindMode mode,
            const MaskRegistry& masks);

/// One experiment bound to its data, model, masks and optimizer. Drives the
/// round loop: train to completion with an epoch-k snapshot, then repeated
/// prune -> rewind -> retrain rounds until the stopping rule fires.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, DatasetPair data);

  /// Convenience: loads the dataset named by the config.
  static Experiment open(const ExperimentConfig& cfg);

  /// Steps 1-3: train T epochs, snapshot at the rewind epoch (plus any
  /// extra requested epochs), record the round-0 baseline.
  PruneRoundRecord train_to_completion(const std::vector<int>& extra_snapshot_epochs = {});

  /// One prune -> rewind -> retrain round. Returns false when the policy
  /// saturates (nothing further can be pruned).
  bool prune_round(int round);

  /// Full Algorithm-1 loop; writes records.csv, manifest.json, the accuracy
  /// SVG and checkpoints under out_dir (if non-empty).
  const std::vector<PruneRoundRecord>& run(const std::string& out_dir);

  struct SweepRow {
    int epoch = 0;
    double top1 = 0.0;
    double stability_l2 = 0.0;
    double remaining_pct = 100.0;
  };
  /// Fixed-sparsity rewind sweep: one pruning decision computed from the
  /// trained model, then rewind to each epoch in turn and retrain T-k
  /// epochs. epoch == T degenerates to no retraining.
  std::vector<SweepRow> sweep_rewind(const std::string& out_dir, const std::vector<int>& epochs);

  // accessors used by tests and the acceptance suite
  const std::vector<PruneRoundRecord>& records() const { return records_; }
  RunStatus status() const { return status_; }
  double baseline_acc() const { return records_.empty() ? 0.0 : records_.front().top1_acc; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  MaskRegistry& masks() { return masks_; }
  const ExperimentConfig& config() const { return cfg_; }
  const Dataset& train_data() const { return data_.train; }
  const Dataset& test_data() const { return data_.test; }
  const Checkpoint& rewind_checkpoint() const;
  const Model& round0_model() const;
  OptimizerState<float>& optimizer_state() { return opt_; }

  /// Single optimizer step on one batch (exposed for property tests).
  void train_step(const Tensor<float>& batch, const std::vector<std::int32_t>& labels,
                  double lr);
  /// Epochs [first, last) with the per-epoch batch order and schedule rate.
  void train_range(int first_epoch, int last_epoch);

 private:
  void train_epoch(int epoch);
  double evaluate();
  PruneRoundRecord snapshot_record(int round, double acc, double wall_s, double threshold);
  PruneDecision select_decision(int round);
  void write_artifacts(const std::string& out_dir) const;

  ExperimentConfig cfg_;
  DatasetPair data_;
  Model model_;
  MaskRegistry masks_;
  OptimizerState<float> opt_;
  std::mt19937_64 augment_rng_;
  BatchPlan plan_;
  Tensor<float> stats_x_;
  int schedule_pos_ = 0;
  AiapState aiap_;
  std::optional<Checkpoint> rewind_ckpt_;
  std::vector<std::pair<int, Checkpoint>> extra_ckpts_;
  std::unique_ptr<Model> round0_final_;
  std::vector<PruneRoundRecord> records_;
  RunStatus status_ = RunStatus::completed;
};

void write_sweep_csv(const std::string& path, const std::vector<Experiment::SweepRow>& rows);

}  // namespace sprune
