#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sigsched/sensing.hpp"

namespace sigsched {

inline constexpr Seconds kUnlimitedGreen = std::numeric_limits<double>::infinity();

struct SchedulerInput {
  std::vector<ClusterSequence> sequences;  // sequences[p] belongs to phase p
  std::vector<double> weights;             // w(p) > 0
  Seconds changeover_time = 0.0;
  Seconds max_green = kUnlimitedGreen;
  Seconds min_green = 0.0;
  std::size_t current_phase = 0;
  Seconds now = 0.0;
  Seconds green_elapsed = 0.0;          // green already shown on current_phase at `now`
  std::optional<Seconds> ready_time;    // when the intersection can serve again (end of a changeover)
};

struct ScheduleEntry {
  std::size_t phase = 0;
  std::size_t index = 0;  // position in the (possibly split) sequence
  Cluster cluster;
  Seconds ast = 0.0;
  Seconds finish = 0.0;
};

struct GreenInterval {
  std::size_t phase = 0;
  Seconds start = 0.0;
  Seconds end = 0.0;
};

struct PhaseSchedule {
  std::vector<ScheduleEntry> entries;
  double total_weighted_delay = 0.0;
  std::vector<GreenInterval> green;  // one per continuous run
  std::size_t splits = 0;
  std::size_t hold_phase = 0;        // phase to show when there is nothing to serve

  bool empty() const { return entries.empty(); }
  Seconds completion() const { return entries.empty() ? 0.0 : entries.back().finish; }
  /// Phase the controller should show now.
  std::size_t first_phase() const { return entries.empty() ? hold_phase : entries.front().phase; }
};

/// Minimum cumulative weighted delay schedule, sum |c| (ast - arr) w(p),
/// over all interleavings that keep each phase's cluster order. Switching
/// phase costs changeover_time (after min_green has elapsed); a run may not
/// extend past max_green while another phase still has clusters, and a
/// cluster that alone exceeds max_green is split and the problem re-solved.
/// Ties: earlier completion, then lower phase index first.
PhaseSchedule schedule(const SchedulerInput& input);

/// Exhaustive enumeration of the same problem without splitting. At most
/// ten clusters in total; throws SchedulerError beyond that.
PhaseSchedule brute_force_schedule(const SchedulerInput& input);

/// sum over entries of count * (ast - arr) * weights[phase].
double cumulative_weighted_delay(const PhaseSchedule& sched, std::span<const double> weights);

}  // namespace sigsched
