#pragma once

#include <string>
#include <utility>
#include <vector>

namespace affine_flow {

struct MonitorSample {
  double t = 0.0;
  double value = 0.0;
  double bound = 0.0;
};

/// Outcome of one runtime estimate over a trajectory.
struct MonitorReport {
  std::string name;
  std::vector<MonitorSample> samples;  // time-ordered
  double worst_ratio = 0.0;            // max value / bound
  double slack = 0.0;
  bool pass = false;
  bool applicable = true;
  std::string note;
  std::size_t excluded = 0;  // samples dropped, e.g. failed frame extraction
  std::vector<std::pair<std::string, double>> parameters;

  double parameter(const std::string& key) const {
    for (const auto& [k, v] : parameters)
      if (k == key) return v;
    return 0.0;
  }
};

}  // namespace affine_flow
