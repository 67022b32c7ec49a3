#include "sprune/config.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sprune/errors.hpp"
#include "sprune/rng.hpp"

namespace sprune {

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::ilp: return "ilp";
    case PolicyKind::iap: return "iap";
    case PolicyKind::aiap: return "aiap";
  }
  return "?";
}

std::string to_string(RewindMode m) {
  return m == RewindMode::weights_lr ? "weights+lr" : "lr-only";
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::nadam ? "nadam" : "nsgd"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using KeyValues = std::map<std::string, std::string>;  // "section.key" -> value

KeyValues parse_ini(const std::string& text) {
  KeyValues kv;
  std::istringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty() || key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key outside a section");
    if (!kv.emplace(section + "." + key, value).second)
      throw ConfigError("duplicate key " + section + "." + key);
  }
  return kv;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long i = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (model != "lenet300" && model != "lenet5")
    throw ConfigError("experiment.model: unknown model '" + model + "'");
  if (dataset != "mnist" && dataset != "cifar10")
    throw ConfigError("experiment.dataset: unknown dataset '" + dataset + "'");
  if (epochs <= 0) throw ConfigError("experiment.epochs must be positive");
  if (rewind_epoch <= 0 || rewind_epoch >= epochs)
    throw ConfigError("experiment.rewind_epoch must satisfy 0 < k < epochs");
  if (batch_size <= 0) throw ConfigError("experiment.batch_size must be positive");
  if (weight_decay < 0) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (rate_dense <= 0 || rate_dense >= 1 || rate_conv <= 0 || rate_conv >= 1)
    throw ConfigError("pruning rates must lie in (0,1)");
  if (lambda <= 0) throw ConfigError("pruning.lambda must be positive");
  if (stats_batch_size <= 0) throw ConfigError("pruning.stats_batch_size must be positive");
  LrSchedule sched;
  try {
    sched = LrSchedule::parse(lr_text);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("optimizer.lr: ") + e.what());
  }
  if (sched.horizon() < epochs)
    throw ConfigError("optimizer.lr covers " + std::to_string(sched.horizon()) +
                      " epochs but experiment.epochs = " + std::to_string(epochs));
  if (stopping.kind == StoppingRule::Kind::max_rounds) {
    if (stopping.value < 0) throw ConfigError("stopping.max_rounds must be >= 0");
  } else if (stopping.value <= 0) {
    throw ConfigError("stopping rule value must be positive");
  }
}

OptimizerHyper<float> ExperimentConfig::hyper() const {
  OptimizerHyper<float> h;
  h.beta1 = static_cast<float>(beta1);
  h.beta2 = static_cast<float>(beta2);
  h.eps = static_cast<float>(eps);
  h.momentum = static_cast<float>(momentum);
  h.weight_decay = static_cast<float>(weight_decay);
  return h;
}

std::uint64_t ExperimentConfig::effective_stats_seed() const {
  return stats_seed != 0 ? stats_seed : derive_seed(seed, SeedPurpose::kStatsBatch);
}

std::string ExperimentConfig::to_json_string() const {
  nlohmann::json j;
  j["experiment"] = {{"model", model},
                     {"dataset", dataset},
                     {"data_dir", data_dir},
                     {"epochs", epochs},
                     {"rewind_epoch", rewind_epoch},
                     {"rewind_mode", to_string(rewind_mode)},
                     {"seed", seed},
                     {"batch_size", batch_size}};
  j["optimizer"] = {{"kind", to_string(optimizer)}, {"lr", lr_text},
                    {"weight_decay", weight_decay}, {"momentum", momentum},
                    {"beta1", beta1},               {"beta2", beta2},
                    {"eps", eps}};
  j["pruning"] = {{"policy", to_string(policy)},
                  {"rate_dense", rate_dense},
                  {"rate_conv", rate_conv},
                  {"lambda", lambda},
                  {"stats_batch_size", stats_batch_size},
                  {"stats_seed", effective_stats_seed()},
                  {"stats_augment", stats_augment},
                  {"paper_literal_mean", paper_literal_mean}};
  const char* rule = stopping.kind == StoppingRule::Kind::max_rounds ? "max_rounds"
                     : stopping.kind == StoppingRule::Kind::target_accuracy_drop
                         ? "target_accuracy_drop"
                         : "target_compression";
  j["stopping"] = {{rule, stopping.value}};
  return j.dump(2);
}

ExperimentConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides) {
  KeyValues kv = parse_ini(text);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "': expected section.key=value");
    kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }

  ExperimentConfig cfg;
  int stopping_keys = 0;
  for (const auto& [key, value] : kv) {
    if (key == "experiment.model") cfg.model = value;
    else if (key == "experiment.dataset") cfg.dataset = value;
    else if (key == "experiment.data_dir") cfg.data_dir = value;
    else if (key == "experiment.epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "experiment.rewind_epoch")
      cfg.rewind_epoch = static_cast<int>(parse_int(key, value));
    else if (key == "experiment.rewind_mode") {
      if (value == "weights+lr") cfg.rewind_mode = RewindMode::weights_lr;
      else if (value == "lr-only") cfg.rewind_mode = RewindMode::lr_only;
      else throw ConfigError(key + ": expected weights+lr or lr-only, got '" + value + "'");
    } else if (key == "experiment.seed") cfg.seed = parse_u64(key, value);
    else if (key == "experiment.batch_size")
      cfg.batch_size = static_cast<Index>(parse_int(key, value));
    else if (key == "optimizer.kind") {
      if (value == "nadam") cfg.optimizer = OptimizerKind::nadam;
      else if (value == "nsgd") cfg.optimizer = OptimizerKind::nsgd;
      else throw ConfigError(key + ": expected nadam or nsgd, got '" + value + "'");
    } else if (key == "optimizer.lr") cfg.lr_text = value;
    else if (key == "optimizer.weight_decay") cfg.weight_decay = parse_double(key, value);
    else if (key == "optimizer.momentum") cfg.momentum = parse_double(key, value);
    else if (key == "optimizer.beta1") cfg.beta1 = parse_double(key, value);
    else if (key == "optimizer.beta2") cfg.beta2 = parse_double(key, value);
    else if (key == "optimizer.eps") cfg.eps = parse_double(key, value);
    else if (key == "pruning.policy") {
      if (value == "ilp") cfg.policy = PolicyKind::ilp;
      else if (value == "iap") cfg.policy = PolicyKind::iap;
      else if (value == "aiap") cfg.policy = PolicyKind::aiap;
      else throw ConfigError(key + ": expected ilp, iap or aiap, got '" + value + "'");
    } else if (key == "pruning.rate_dense") cfg.rate_dense = parse_double(key, value);
    else if (key == "pruning.rate_conv") cfg.rate_conv = parse_double(key, value);
    else if (key == "pruning.lambda") cfg.lambda = parse_double(key, value);
    else if (key == "pruning.stats_batch_size")
      cfg.stats_batch_size = static_cast<Index>(parse_int(key, value));
    else if (key == "pruning.stats_seed") cfg.stats_seed = parse_u64(key, value);
    else if (key == "pruning.stats_augment") cfg.stats_augment = parse_bool(key, value);
    else if (key == "pruning.paper_literal_mean")
      cfg.paper_literal_mean = parse_bool(key, value);
    else if (key == "stopping.max_rounds") {
      cfg.stopping = {StoppingRule::Kind::max_rounds, parse_double(key, value)};
      ++stopping_keys;
    } else if (key == "stopping.target_accuracy_drop") {
      cfg.stopping = {StoppingRule::Kind::target_accuracy_drop, parse_double(key, value)};
      ++stopping_keys;
    } else if (key == "stopping.target_compression") {
      cfg.stopping = {StoppingRule::Kind::target_compression, parse_double(key, value)};
      ++stopping_keys;
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (stopping_keys > 1)
    throw ConfigError("exactly one stopping rule may be set, got " +
                      std::to_string(stopping_keys));
  cfg.validate();
  cfg.schedule = LrSchedule::parse(cfg.lr_text);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str(), overrides);
}

}  // namespace sprune
