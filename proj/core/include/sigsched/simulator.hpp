#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "sigsched/network.hpp"

namespace sigsched {

using VehicleId = std::uint64_t;

struct Vehicle {
  VehicleId id = 0;
  std::size_t source = kNone;  // kNone for vehicles placed by hand
  Seconds entry_time = 0.0;    // generation time, before any boundary wait
  std::vector<std::size_t> route;      // link indices
  std::vector<std::size_t> movements;  // movement at the end of route[k]; kNone on the last link
  std::vector<Seconds> link_entry;     // time the vehicle entered route[k]
  std::size_t hop = 0;
  double position = 0.0;  // metres from the start of route[hop]
  bool queued = false;
  bool exited = false;
  Seconds free_flow_time = 0.0;

  std::size_t link() const { return route[hop]; }
  std::size_t movement() const { return movements[hop]; }
};

struct VehicleRecord {
  VehicleId id = 0;
  std::size_t source = kNone;
  Seconds entry = 0.0;
  Seconds exit = 0.0;
  Seconds free_flow = 0.0;
  Seconds delay = 0.0;
};

struct LinkState {
  std::deque<VehicleId> moving;  // in order of entry
  std::deque<VehicleId> queue;   // stop-line queue, head first
  double discharge_credit = 0.0;

  int occupancy() const { return static_cast<int>(moving.size() + queue.size()); }
};

struct SignalState {
  std::size_t active = 0;
  std::size_t target = 0;
  Seconds green_elapsed = 0.0;
  Seconds changeover_left = 0.0;

  bool in_changeover() const { return changeover_left > 0.0; }
  /// Phase that will be green once any changeover completes.
  std::size_t committed() const { return in_changeover() ? target : active; }
};

struct SimCounters {
  std::uint64_t generated = 0;
  std::uint64_t admitted = 0;
  std::uint64_t exited = 0;
  std::uint64_t blocked_discharges = 0;
  std::uint64_t max_green_violations = 0;
  std::uint64_t phase_switches = 0;
};

struct SimState {
  std::int64_t step = 0;
  Seconds clock = 0.0;
  std::vector<Vehicle> vehicles;  // index == id
  std::vector<LinkState> links;
  std::vector<SignalState> signals;
  std::vector<std::deque<VehicleId>> boundary_buffers;  // per source
  std::vector<std::vector<std::uint64_t>> discharged;   // cumulative, per intersection per movement
  std::vector<VehicleRecord> exited;
  SimCounters counters;
  std::mt19937_64 rng;

  std::size_t buffered() const;
  std::size_t on_links() const;
};

SimState make_initial_state(const ValidatedNetwork& net, std::uint64_t seed);

/// Poisson arrivals for the current step at each source's current rate,
/// routes sampled from the source's turn tables. Vehicles that cannot enter
/// a full first link wait in the source's boundary buffer. With `generate`
/// off only buffered vehicles are admitted.
void inject_vehicles(SimState& state, const ValidatedNetwork& net, bool generate = true);

/// One dt of movement, signal update and discharge. `controls` holds the
/// requested phase per intersection; changeover and min green are enforced
/// here. Throws InvariantViolation if conservation or capacity breaks.
void step(SimState& state, const ValidatedNetwork& net, std::span<const std::size_t> controls);

/// Puts a vehicle with an explicit route at the start of route[0] (or in its
/// stop-line queue when `queued`). Used by tests and tools.
VehicleId place_vehicle(SimState& state, const ValidatedNetwork& net, std::vector<std::size_t> route,
                        bool queued = false);

struct MetricsSample {
  Seconds time = 0.0;
  std::vector<VehicleRecord> new_records;     // exited since the requested index
  std::vector<std::vector<int>> phase_queues;  // [intersection][phase]
  std::vector<int> link_queues;                // stop-line queue per link
  int total_queue = 0;                         // sum over all stop-line queues
};

MetricsSample measure(const SimState& state, const ValidatedNetwork& net, std::size_t records_from = 0);

/// Free-flow referenced delay of a finished trip.
inline Seconds trip_delay(Seconds entry, Seconds exit, Seconds free_flow) { return exit - entry - free_flow; }

// ---------------------------------------------------------------------------
// Read-only per-intersection view handed to controllers.

struct ApproachVehicle {
  Seconds eta = 0.0;  // time until the stop line
  std::size_t movement = 0;
};

struct ApproachSnapshot {
  std::size_t link = 0;
  double saturation_rate = 0.0;
  std::vector<std::size_t> queued;       // movement of each queued vehicle, head first
  std::vector<ApproachVehicle> moving;   // ordered by eta
};

struct IntersectionSnapshot {
  std::size_t intersection = 0;
  Seconds now = 0.0;
  SignalState signal;
  std::vector<ApproachSnapshot> approaches;  // one per in-link
  std::vector<std::uint64_t> discharged;     // cumulative per movement
};

IntersectionSnapshot snapshot(const SimState& state, const ValidatedNetwork& net, std::size_t s);

/// Owns a network handle and a state; convenience wrapper over the free functions.
class Simulator {
 public:
  Simulator(std::shared_ptr<const ValidatedNetwork> net, std::uint64_t seed);

  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const ValidatedNetwork& network() const { return *net_; }

  void advance(std::span<const std::size_t> controls) {
    inject_vehicles(state_, *net_);
    step(state_, *net_, controls);
  }
  MetricsSample measure(std::size_t records_from = 0) const { return sigsched::measure(state_, *net_, records_from); }
  IntersectionSnapshot snapshot(std::size_t s) const { return sigsched::snapshot(state_, *net_, s); }

 private:
  std::shared_ptr<const ValidatedNetwork> net_;
  SimState state_;
};

}  // namespace sigsched
