#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sprune/errors.hpp"
#include "sprune/harness.hpp"
#include "sprune/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// precedence: explicit flag, then SPRUNE_DATA_DIR, then the config value
std::string resolve_data_dir(const std::string& from_config, const std::string& from_flag) {
  if (!from_flag.empty()) return from_flag;
  if (const char* env = std::getenv("SPRUNE_DATA_DIR"); env && *env) return env;
  return from_config;
}

sprune::ExperimentConfig load_run_config(const std::string& path,
                                         const std::vector<std::string>& overrides,
                                         const std::string& data_dir_flag) {
  auto cfg = sprune::load_config(path, overrides);
  cfg.data_dir = resolve_data_dir(cfg.data_dir, data_dir_flag);
  return cfg;
}

int run_verify(const std::string& data_dir, const std::string& which) {
  bool all_ok = true;
  auto report = [&](const std::string& name, const std::vector<sprune::FileCheck>& checks) {
    std::printf("%s (%s):\n", name.c_str(), (data_dir + "/" + name).c_str());
    for (const auto& c : checks) {
      std::printf("  %-28s %s  %s\n", c.file.c_str(), c.ok ? "ok " : "FAIL", c.detail.c_str());
      all_ok = all_ok && c.ok;
    }
  };
  if (which == "mnist" || which == "all") report("mnist", sprune::verify_mnist(data_dir + "/mnist"));
  if (which == "cifar10" || which == "all")
    report("cifar10", sprune::verify_cifar10(data_dir + "/cifar10"));
  std::printf("%s\n", all_ok ? "PASS" : "FAIL");
  return all_ok ? kExitOk : kExitData;
}

int run_report(const std::vector<std::string>& dirs, std::string baseline_dir,
               const std::string& out_dir) {
  struct Run {
    std::string dir, policy, model;
    double baseline_acc = 0;
    std::vector<sprune::PruneRoundRecord> records;
  };
  std::vector<Run> runs;
  for (const auto& dir : dirs) {
    Run r;
    r.dir = dir;
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) {
      std::fprintf(stderr, "report: %s/manifest.json missing\n", dir.c_str());
      return kExitConfig;
    }
    nlohmann::json j = nlohmann::json::parse(mf, nullptr, false);
    if (j.is_discarded()) {
      std::fprintf(stderr, "report: %s/manifest.json is not valid JSON\n", dir.c_str());
      return kExitConfig;
    }
    r.policy = j["pruning"]["policy"].get<std::string>();
    r.model = j["experiment"]["model"].get<std::string>();
    r.baseline_acc = j["baseline_acc"].get<double>();
    r.records = sprune::read_records_csv(dir + "/records.csv");
    runs.push_back(std::move(r));
  }
  for (const auto& r : runs)
    if (r.model != runs.front().model) {
      std::fprintf(stderr, "report: %s trained %s but %s trained %s\n", runs.front().dir.c_str(),
                   runs.front().model.c_str(), r.dir.c_str(), r.model.c_str());
      return kExitConfig;
    }
  if (baseline_dir.empty()) {
    baseline_dir = runs.front().dir;
    for (const auto& r : runs)
      if (r.policy == "ilp") baseline_dir = r.dir;
  }
  const Run* base = nullptr;
  for (const auto& r : runs)
    if (r.dir == baseline_dir) base = &r;
  if (!base) {
    std::fprintf(stderr, "report: baseline %s is not among the run dirs\n", baseline_dir.c_str());
    return kExitConfig;
  }

  const double drops[] = {0.0, 1.0, 3.0, 5.0};
  std::ostringstream csv;
  csv << "drop_pct";
  for (const auto& r : runs) csv << ",compression_" << r.policy << ",flops_speedup_" << r.policy;
  csv << "\n";

  std::printf("model %s, flop speedups normalized to %s (%s)\n\n", runs.front().model.c_str(),
              base->dir.c_str(), base->policy.c_str());
  std::printf("%-10s", "drop");
  for (const auto& r : runs) std::printf("  %14s", (r.policy + " comp.").c_str());
  for (const auto& r : runs) std::printf("  %14s", (r.policy + " speedup").c_str());
  std::printf("\n");
  for (double drop : drops) {
    std::printf("%-10s", (std::to_string(static_cast<int>(drop)) + "%").c_str());
    csv << drop;
    std::vector<std::string> comp_cells, speed_cells;
    for (const auto& r : runs) {
      const auto c = sprune::compression_at_drop(r.records, r.baseline_acc, drop);
      const auto f = sprune::flops_at_drop(r.records, r.baseline_acc, drop);
      const auto fb = sprune::flops_at_drop(base->records, base->baseline_acc, drop);
      char buf[64];
      std::snprintf(buf, sizeof(buf), c.qualified ? "%.2fx" : "%.2fx (none)", c.ratio);
      comp_cells.emplace_back(buf);
      const double speedup = (f.qualified && fb.qualified)
                                 ? static_cast<double>(fb.flops) / static_cast<double>(f.flops)
                                 : 1.0;
      std::snprintf(buf, sizeof(buf), "%.2fx", speedup);
      speed_cells.emplace_back(buf);
      csv << "," << c.ratio << "," << speedup;
    }
    for (const auto& s : comp_cells) std::printf("  %14s", s.c_str());
    for (const auto& s : speed_cells) std::printf("  %14s", s.c_str());
    std::printf("\n");
    csv << "\n";
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/report.csv");
  out << csv.str();
  std::printf("\nwrote %s/report.csv\n", out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative structured pruning with rewinding"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", data_dir_flag, dataset = "all";
  std::vector<std::string> overrides, report_dirs;
  std::string baseline_dir, epochs_text;

  auto* verify = app.add_subcommand("verify-data", "check dataset files");
  verify->add_option("--data-dir", data_dir_flag, "dataset root directory");
  verify->add_option("--dataset", dataset, "mnist | cifar10 | all");

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config file")->required();
    cmd->add_option("--set", overrides, "override config values (section.key=value)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--data-dir", data_dir_flag, "dataset root directory");
  };
  auto* train = app.add_subcommand("train", "train the baseline network only");
  add_run_options(train);
  auto* iterate = app.add_subcommand("iterate", "run the full iterative pruning experiment");
  add_run_options(iterate);
  auto* sweep = app.add_subcommand("sweep-rewind", "one pruning round per rewind epoch");
  add_run_options(sweep);
  sweep->add_option("--epochs", epochs_text, "comma-separated rewind epochs")->required();

  auto* report = app.add_subcommand("report", "compare finished runs");
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--baseline", baseline_dir, "run dir to normalize flops against");
  report->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*verify) return run_verify(resolve_data_dir("data", data_dir_flag), dataset);
    if (*report) return run_report(report_dirs, baseline_dir, out_dir);

    auto cfg = load_run_config(config_path, overrides, data_dir_flag);
    if (*train) cfg.stopping = {sprune::StoppingRule::Kind::max_rounds, 0};

    auto exp = sprune::Experiment::open(cfg);
    if (*sweep) {
      std::vector<int> epochs;
      std::stringstream ss(epochs_text);
      std::string piece;
      while (std::getline(ss, piece, ',')) epochs.push_back(std::stoi(piece));
      auto rows = exp.sweep_rewind(out_dir, epochs);
      std::printf("%-14s %-10s %-14s %s\n", "rewind_epoch", "top1", "stability_l2",
                  "remaining_pct");
      for (const auto& r : rows)
        std::printf("%-14d %-10.2f %-14.4f %.2f\n", r.epoch, r.top1, r.stability_l2,
                    r.remaining_pct);
    } else {
      const auto& records = exp.run(out_dir);
      std::printf("%-6s %-16s %-10s %-10s %s\n", "round", "remaining", "pct", "top1", "T");
      for (const auto& r : records)
        std::printf("%-6d %-16lld %-10.3f %-10.2f %.4f\n", r.round,
                    static_cast<long long>(r.remaining_params), r.remaining_pct, r.top1_acc,
                    r.threshold);
      std::printf("status: %s\n", sprune::to_string(exp.status()).c_str());
    }
    std::printf("artifacts in %s\n", out_dir.c_str());
    return kExitOk;
  } catch (const sprune::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sprune::FormatError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const sprune::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
