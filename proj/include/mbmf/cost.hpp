#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mbmf/errors.hpp"

namespace mbmf {

enum class CostMode { proxy, measured };

inline std::string to_string(CostMode m) { return m == CostMode::proxy ? "proxy" : "measured"; }

inline CostMode cost_mode_from_string(const std::string& s) {
  if (s == "proxy") return CostMode::proxy;
  if (s == "measured") return CostMode::measured;
  throw ParameterError("cost mode must be 'proxy' or 'measured', got '" + s + "'");
}

// Conversion of deterministic work units into seconds-equivalent. One MB
// unit is one (s, a) Bellman backup; a converged plan over the 38 x 8 arena
// lands near 1e-2 s. One MF unit is one table read.
struct CostModel {
  CostMode mode = CostMode::proxy;
  double seconds_per_backup = 2e-6;
  double seconds_per_mf_lookup = 1e-5;
  double seconds_per_forward_pass = 2e-5;
};

struct InferenceCost {
  std::uint64_t units = 0;  // backups (MB), lookups (MF) or forward passes (DQN)
  std::optional<double> wall_seconds;
  double seconds_equivalent = 0.0;
};

inline InferenceCost make_cost(std::uint64_t units, double seconds_per_unit, std::optional<double> wall,
                               const CostModel& model) {
  InferenceCost c;
  c.units = units;
  c.wall_seconds = wall;
  c.seconds_equivalent = (model.mode == CostMode::measured && wall) ? *wall : static_cast<double>(units) * seconds_per_unit;
  return c;
}

}  // namespace mbmf
