#pragma once

#include <set>
#include <utility>
#include <vector>

#include "sigsched/network.hpp"

namespace sigsched {

/// Knobs for a rows x cols Manhattan grid with boundary entries/exits on
/// every edge. Intersection (r, c) is named "I<r><c>", row 0 at the top;
/// links are named "<from>><to>"; boundaries "W<r>", "E<r>", "N<c>", "S<c>".
struct GridOptions {
  int rows = 4;
  int cols = 4;

  double link_length = 200.0;      // between intersections
  double boundary_length = 200.0;  // entry/exit links
  double free_flow_speed = 10.0;
  double saturation_rate = 0.5;
  int capacity = 0;                // 0: derive from length / 7.5 m
  int boundary_capacity = 0;

  Seconds changeover_time = 4.0;
  Seconds max_green = 60.0;
  Seconds min_green = 0.0;

  bool turns = true;
  double p_left = 0.1;
  double p_right = 0.1;

  /// Intersections (r, c) using split three-phase control: EW, northbound, southbound.
  std::set<std::pair<int, int>> three_phase;

  /// Demand per entry link is rate * multiplier; multipliers by travel direction.
  std::vector<DemandInterval> ramp;
  double eastbound = 1.0;
  double westbound = 1.0;
  double northbound = 1.0;
  double southbound = 1.0;

  GlobalParams params;
};

NetworkSpec make_grid(const GridOptions& opt);

/// Piecewise-constant late-afternoon ramp: 236, 354 and 528 veh/h over
/// 0-30 min, 30-60 min and 60-120 min, each multiplied by `scale`.
std::vector<DemandInterval> pm_rush_ramp(double scale = 1.0);
std::vector<DemandTier> pm_rush_tiers();

}  // namespace sigsched
