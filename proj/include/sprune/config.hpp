#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sprune/optimizer.hpp"
#include "sprune/pruning.hpp"

namespace sprune {

enum class PolicyKind { ilp, iap, aiap };
enum class RewindMode { weights_lr, lr_only };

std::string to_string(PolicyKind p);
std::string to_string(RewindMode m);
std::string to_string(OptimizerKind k);

struct StoppingRule {
  enum class Kind { max_rounds, target_accuracy_drop, target_compression };
  Kind kind = Kind::max_rounds;
  double value = 30;
};

/// Fully resolved experiment description. Field defaults are the MNIST /
/// LeNet-300-100 configuration; every field can be set from the config file
/// or a --set override.
struct ExperimentConfig {
  // [experiment]
  std::string model = "lenet300";
  std::string dataset = "mnist";
  std::string data_dir = "data";
  int epochs = 6;
  int rewind_epoch = 5;
  RewindMode rewind_mode = RewindMode::weights_lr;
  std::uint64_t seed = 1;
  Index batch_size = 60;

  // [optimizer]
  OptimizerKind optimizer = OptimizerKind::nadam;
  std::string lr_text = "0.0012 @ [0,6)";
  double weight_decay = 1e-4;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // [pruning]
  PolicyKind policy = PolicyKind::iap;
  double rate_dense = 0.20;
  double rate_conv = 0.10;
  double lambda = 0.01;
  Index stats_batch_size = 60;
  std::uint64_t stats_seed = 0;  // 0: derive from the master seed
  bool stats_augment = false;
  bool paper_literal_mean = false;

  // [stopping]
  StoppingRule stopping;

  LrSchedule schedule;  // parsed from lr_text

  void validate() const;  // throws ConfigError
  PruneRates rates() const { return PruneRates{rate_dense, rate_conv}; }
  OptimizerHyper<float> hyper() const;
  std::uint64_t effective_stats_seed() const;

  std::string to_json_string() const;  // manifest body
};

/// key = value lines grouped under [section] headers; '#' starts a comment.
/// Unknown sections or keys are rejected. Overrides are "section.key=value".
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
ExperimentConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides);

}  // namespace sprune
