#pragma once

#include <random>
#include <span>
#include <vector>

#include "sigsched/network.hpp"
#include "sigsched/simulator.hpp"

namespace sigsched {

/// An aggregated platoon or queue: `count` vehicles arriving at `arr` whose
/// discharge would end at `dep`.
struct Cluster {
  double count = 0.0;
  Seconds arr = 0.0;
  Seconds dep = 0.0;

  Seconds duration() const { return dep - arr; }
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterSequence {
  std::size_t phase = 0;
  std::vector<Cluster> clusters;  // ordered by arr

  double vehicle_count() const;
};

/// A predicted stop-line arrival on one approach.
struct SensedArrival {
  Seconds arrival = 0.0;
  std::size_t link = 0;
  double saturation_rate = 1.0;
};

/// Merges arrivals whose consecutive gap is <= cluster_gap. Arrivals at or
/// beyond now + horizon are ignored. A cluster's duration is the longest
/// per-approach discharge time, count_l / saturation_l, since approaches of
/// one phase discharge in parallel.
ClusterSequence cluster_arrivals(std::vector<SensedArrival> arrivals, std::size_t phase, Seconds now,
                                 Seconds horizon, Seconds cluster_gap);

/// Cluster sequence for one phase: queued vehicles arrive "now", moving ones
/// at now + remaining distance / free-flow speed.
ClusterSequence build_cluster_sequence(const IntersectionSnapshot& snap, const Intersection& x, std::size_t phase,
                                       Seconds horizon, Seconds cluster_gap);

/// Stop-line queue summed over the movements served by `phase`. With
/// noise_std > 0 a rounded N(0, noise_std) error is added (clamped at zero).
int estimate_queue(const IntersectionSnapshot& snap, const Intersection& x, std::size_t phase,
                   double noise_std = 0.0, std::mt19937_64* rng = nullptr);

/// Queued vehicles per in-link of the snapshot, in snapshot order.
std::vector<int> link_queues(const IntersectionSnapshot& snap);

/// Moving-average turning proportions for one intersection.
///   zeta(m): share of in_link(m)'s traffic taking movement m (sums to 1 per in-link)
///   eta(m):  share of phase(m)'s outflow carried by movement m (sums to 1 per phase)
class TurnEstimate {
 public:
  TurnEstimate() = default;
  TurnEstimate(const Intersection& x, double ema_alpha);

  /// Folds in one window of per-movement counts. In-links with no events keep
  /// their previous proportions; the first non-empty window initializes them.
  void update(std::span<const double> movement_counts);

  double zeta(std::size_t movement) const { return zeta_.at(movement); }
  double eta(std::size_t movement) const;
  double in_flow(std::size_t in_link_slot) const { return in_flow_.at(in_link_slot); }
  double alpha() const { return alpha_; }
  std::size_t movement_count() const { return zeta_.size(); }

 private:
  double alpha_ = 0.1;
  std::vector<std::size_t> slot_of_movement_;  // movement -> in-link slot
  std::vector<std::size_t> phase_of_movement_;
  std::vector<std::vector<std::size_t>> slot_movements_;
  std::vector<std::vector<std::size_t>> phase_movements_;
  std::vector<double> zeta_;
  std::vector<double> in_flow_;  // EMA of vehicles per window, per in-link slot
  std::vector<bool> seen_;       // per in-link slot
};

TurnEstimate update_turning_proportions(TurnEstimate est, std::span<const double> movement_counts);

}  // namespace sigsched
