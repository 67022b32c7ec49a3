#include <cstdio>
#include <sstream>

#include "sprune/errors.hpp"
#include "sprune/optimizer.hpp"

namespace sprune {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

// Accepted segment forms, mirroring how schedules are usually written out:
//   "0.0012 @ [0,6)"      constant 0.0012 on epochs [0,6)
//   "0.4*t/8 @ [0,8)"     linear warmup 0.4*t/8 on epochs [0,8)
LrSchedule LrSchedule::parse(const std::string& text) {
  // split on commas outside [a,b) intervals
  std::vector<std::string> pieces;
  std::string current;
  bool in_interval = false;
  for (char ch : text) {
    if (ch == '[') in_interval = true;
    if (ch == ')') in_interval = false;
    if (ch == ',' && !in_interval) {
      pieces.push_back(current);
      current.clear();
    } else {
      current += ch;
    }
  }
  pieces.push_back(current);

  std::vector<LrSegment> segments;
  for (std::string piece : pieces) {
    piece = trim(piece);
    if (piece.empty()) continue;
    LrSegment seg;
    const auto at = piece.find('@');
    if (at == std::string::npos)
      throw UsageError("lr segment '" + piece + "': expected 'value @ [a,b)'");
    const std::string expr = trim(piece.substr(0, at));
    const std::string range = trim(piece.substr(at + 1));
    int den = 0;
    double value = 0;
    if (std::sscanf(expr.c_str(), "%lf*t/%d", &value, &den) == 2) {
      if (den <= 0) throw UsageError("lr segment '" + piece + "': bad warmup denominator");
      seg.warmup = true;
      seg.warmup_den = den;
      seg.value = value;
    } else if (std::sscanf(expr.c_str(), "%lf", &value) == 1) {
      seg.value = value;
    } else {
      throw UsageError("lr segment '" + piece + "': cannot parse rate '" + expr + "'");
    }
    if (std::sscanf(range.c_str(), "[%d,%d)", &seg.t_begin, &seg.t_end) != 2)
      throw UsageError("lr segment '" + piece + "': cannot parse interval '" + range + "'");
    segments.push_back(seg);
  }
  return LrSchedule(segments);
}

std::string LrSchedule::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (i) os << ", ";
    if (s.warmup)
      os << s.value << "*t/" << s.warmup_den;
    else
      os << s.value;
    os << " @ [" << s.t_begin << "," << s.t_end << ")";
  }
  return os.str();
}

}  // namespace sprune
