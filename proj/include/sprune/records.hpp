#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sprune {

/// One row per pruning round; round 0 is the unpruned trained baseline.
struct PruneRoundRecord {
  int round = 0;
  std::int64_t remaining_params = 0;
  double remaining_pct = 100.0;
  std::int64_t flops = 0;
  double top1_acc = 0.0;   // percent
  double threshold = 0.0;  // AIAP T[r]; 0 for other policies
  double wall_s = 0.0;
};

void write_records_csv(const std::string& path, const std::vector<PruneRoundRecord>& records);
std::vector<PruneRoundRecord> read_records_csv(const std::string& path);

/// Accuracy (y) against remaining parameters in percent (x, log scale).
void write_accuracy_svg(const std::string& path, const std::string& title,
                        const std::vector<PruneRoundRecord>& records);

}  // namespace sprune
