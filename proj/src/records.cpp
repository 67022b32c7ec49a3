#include "sprune/records.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sprune/errors.hpp"

namespace sprune {

void write_records_csv(const std::string& path, const std::vector<PruneRoundRecord>& records) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  f << "round,remaining_params,remaining_pct,flops,top1_acc,threshold_T,wall_s\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%d,%lld,%.6f,%lld,%.4f,%.6f,%.3f\n", r.round,
                  static_cast<long long>(r.remaining_params), r.remaining_pct,
                  static_cast<long long>(r.flops), r.top1_acc, r.threshold, r.wall_s);
    f << line;
  }
}

std::vector<PruneRoundRecord> read_records_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("round,", 0) != 0)
    throw FormatError(path + ": not a records csv");
  std::vector<PruneRoundRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    PruneRoundRecord r;
    long long params = 0, flops = 0;
    if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lld,%lf,%lf,%lf", &r.round, &params,
                    &r.remaining_pct, &flops, &r.top1_acc, &r.threshold, &r.wall_s) != 7)
      throw FormatError(path + ": bad row '" + line + "'");
    r.remaining_params = params;
    r.flops = flops;
    out.push_back(r);
  }
  return out;
}

void write_accuracy_svg(const std::string& path, const std::string& title,
                        const std::vector<PruneRoundRecord>& records) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  const int width = 640, height = 440;
  const int ml = 60, mr = 20, mt = 40, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double min_pct = 100.0;
  for (const auto& r : records) min_pct = std::min(min_pct, r.remaining_pct);
  min_pct = std::max(0.1, min_pct * 0.8);
  const double lx0 = std::log10(min_pct), lx1 = std::log10(100.0);

  auto sx = [&](double pct) {
    return ml + pw * (std::log10(std::max(pct, min_pct)) - lx0) / (lx1 - lx0);
  };
  auto sy = [&](double acc) { return mt + ph * (1.0 - acc / 100.0); };

  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
    << "' viewBox='0 0 " << width << " " << height << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<text x='" << width / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
    << "</text>\n";

  for (int acc = 0; acc <= 100; acc += 20) {
    const double y = sy(acc);
    f << "<line x1='" << ml << "' y1='" << y << "' x2='" << width - mr << "' y2='" << y
      << "' stroke='#ddd'/>\n";
    f << "<text x='" << ml - 8 << "' y='" << y + 4
      << "' text-anchor='end' font-size='11'>" << acc << "</text>\n";
  }
  for (double pct = 100.0; pct >= min_pct; pct /= 10.0) {
    const double x = sx(pct);
    f << "<line x1='" << x << "' y1='" << mt << "' x2='" << x << "' y2='" << height - mb
      << "' stroke='#ddd'/>\n";
    f << "<text x='" << x << "' y='" << height - mb + 16
      << "' text-anchor='middle' font-size='11'>" << pct << "%</text>\n";
  }
  f << "<text x='" << width / 2 << "' y='" << height - 12
    << "' text-anchor='middle' font-size='12'>remaining parameters (%)</text>\n";
  f << "<text x='16' y='" << mt + ph / 2
    << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << mt + ph / 2
    << ")'>top-1 accuracy (%)</text>\n";

  std::ostringstream pts;
  for (const auto& r : records) pts << sx(r.remaining_pct) << "," << sy(r.top1_acc) << " ";
  f << "<polyline fill='none' stroke='#1f77b4' stroke-width='2' points='" << pts.str()
    << "'/>\n";
  for (const auto& r : records)
    f << "<circle cx='" << sx(r.remaining_pct) << "' cy='" << sy(r.top1_acc)
      << "' r='2.5' fill='#1f77b4'/>\n";
  f << "</svg>\n";
}

}  // namespace sprune
