#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sigsched {

using Seconds = double;

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// Orientation role of a phase in the two-phase energy (+1 for h, -1 for v).
enum class EdgeClass { h, v };

struct MovementSpec {
  std::string in_link;
  std::string out_link;

  friend bool operator==(const MovementSpec&, const MovementSpec&) = default;
};

struct PhaseSpec {
  std::size_t id = 0;
  std::vector<MovementSpec> movements;
  std::optional<EdgeClass> edge_class;

  friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

struct IntersectionSpec {
  std::string id;
  std::vector<PhaseSpec> phases;
  Seconds changeover_time = 4.0;
  Seconds max_green = 60.0;
  Seconds min_green = 0.0;

  friend bool operator==(const IntersectionSpec&, const IntersectionSpec&) = default;
};

struct LinkSpec {
  std::string id;
  std::string from;
  std::string to;
  double length = 0.0;           // m
  double free_flow_speed = 0.0;  // m/s
  double saturation_rate = 0.0;  // veh/s
  int capacity = 1;              // vehicles

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct DemandInterval {
  Seconds start = 0.0;
  Seconds end = 0.0;
  double rate_vph = 0.0;

  friend bool operator==(const DemandInterval&, const DemandInterval&) = default;
};

/// intersection id -> in_link id -> out_link id -> probability
using RoutePolicy =
    std::map<std::string, std::map<std::string, std::map<std::string, double>>>;

struct DemandProfile {
  std::string source;  // id of an entry link (from a boundary)
  std::vector<DemandInterval> schedule;
  RoutePolicy route_policy;

  friend bool operator==(const DemandProfile&, const DemandProfile&) = default;
};

struct DemandTier {
  std::string label;
  Seconds start = 0.0;
  Seconds end = 0.0;

  friend bool operator==(const DemandTier&, const DemandTier&) = default;
};

struct GlobalParams {
  Seconds dt = 1.0;
  Seconds horizon = 60.0;
  Seconds replan_period = 5.0;
  Seconds cluster_gap = 3.0;
  double mf_beta = 0.1;
  double mf_damping = 0.3;
  std::uint64_t seed = 1;

  double weight_floor = 1e-3;
  double ema_alpha = 0.1;
  Seconds turn_window = 60.0;
  double staleness_periods = 3.0;
  int message_delay_steps = 1;
  double message_loss = 0.0;
  double sensor_noise_std = 0.0;

  Seconds warmup = 300.0;
  Seconds queue_sample_period = 5.0;
  std::vector<Seconds> fixed_time_green;  // per phase; empty means 30 s each
  double stability_epsilon = 0.0;         // veh/s; 0 means undeclared
  std::vector<DemandTier> tiers;

  friend bool operator==(const GlobalParams&, const GlobalParams&) = default;
};

struct NetworkSpec {
  std::vector<std::string> boundaries;
  std::vector<IntersectionSpec> intersections;
  std::vector<LinkSpec> links;
  std::vector<DemandProfile> demand;
  GlobalParams params;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// ---------------------------------------------------------------------------
// Validated, index-based form.

struct Endpoint {
  enum class Kind { intersection, boundary };
  Kind kind = Kind::boundary;
  std::size_t index = 0;

  bool is_intersection() const { return kind == Kind::intersection; }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct Link {
  std::string id;
  Endpoint from;
  Endpoint to;
  double length = 0.0;
  double free_flow_speed = 0.0;
  double saturation_rate = 0.0;
  int capacity = 1;

  Seconds free_flow_time() const { return length / free_flow_speed; }
};

struct Movement {
  std::size_t in_link = 0;
  std::size_t out_link = 0;
  std::size_t phase = 0;
};

struct Intersection {
  std::string id;
  Seconds changeover_time = 0.0;
  Seconds max_green = 0.0;
  Seconds min_green = 0.0;
  std::vector<Movement> movements;
  std::vector<std::vector<std::size_t>> phase_movements;  // movement indices
  std::vector<std::size_t> in_links;
  std::vector<std::size_t> out_links;
  std::vector<std::size_t> neighbors;  // sorted intersection indices
  std::vector<std::vector<std::size_t>> upstream;    // per phase, sorted
  std::vector<std::vector<std::size_t>> downstream;  // per phase, sorted
  std::size_t h_phase = 0;  // phase that plays sigma = 1 in the two-phase model

  std::size_t num_phases() const { return phase_movements.size(); }
  std::optional<std::size_t> movement_index(std::size_t in_link,
                                            std::size_t out_link) const;
};

/// Cumulative turn distribution for one in-link at one intersection.
struct TurnTable {
  std::vector<std::size_t> movements;  // indices into Intersection::movements
  std::vector<double> probabilities;
};

struct Source {
  std::size_t link = 0;
  std::vector<DemandInterval> schedule;
  // per intersection, per in-link (keyed by link index)
  std::vector<std::map<std::size_t, TurnTable>> turns;

  double rate_vph_at(Seconds t) const;
};

class ValidatedNetwork {
 public:
  const NetworkSpec& spec() const { return spec_; }
  const GlobalParams& params() const { return spec_.params; }

  const std::vector<Intersection>& intersections() const { return intersections_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Source>& sources() const { return sources_; }
  const std::vector<std::string>& boundaries() const { return spec_.boundaries; }

  const Intersection& intersection(std::size_t i) const { return intersections_.at(i); }
  const Link& link(std::size_t l) const { return links_.at(l); }

  std::optional<std::size_t> find_intersection(const std::string& id) const;
  std::optional<std::size_t> find_link(const std::string& id) const;

  /// Total number of (intersection, phase) pairs.
  std::size_t phase_count() const;
  /// Number of stop-line queues (in-links ending at an intersection).
  std::size_t queue_count() const;

 private:
  friend ValidatedNetwork validate_network(NetworkSpec spec);
  ValidatedNetwork() = default;

  NetworkSpec spec_;
  std::vector<Intersection> intersections_;
  std::vector<Link> links_;
  std::vector<Source> sources_;
  std::map<std::string, std::size_t> intersection_index_;
  std::map<std::string, std::size_t> link_index_;
};

/// Checks a parsed spec and builds the indexed form. Throws ValidationError.
ValidatedNetwork validate_network(NetworkSpec spec);

struct NeighborSets {
  std::vector<std::size_t> upstream;
  std::vector<std::size_t> downstream;
};

/// Neighbors feeding (upstream) and fed by (downstream) phase `phase` of
/// intersection `s`. Boundary endpoints are never neighbors.
NeighborSets neighbor_sets(const ValidatedNetwork& net, std::size_t s, std::size_t phase);

std::string to_string(EdgeClass c);
EdgeClass edge_class_from_string(const std::string& s);

}  // namespace sigsched
