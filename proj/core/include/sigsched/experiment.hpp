#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigsched/network.hpp"
#include "sigsched/protocol.hpp"
#include "sigsched/simulator.hpp"

namespace sigsched {

struct ExperimentConfig {
  std::filesystem::path scenario;   // read when `spec` is empty
  std::optional<NetworkSpec> spec;
  ControllerMode mode = ControllerMode::composite;
  std::vector<std::uint64_t> seeds{1};
  Seconds duration = 3600.0;
  std::optional<Seconds> warmup;        // defaults to the scenario's
  std::optional<double> message_loss;   // overrides the scenario's
  std::filesystem::path out_dir;        // empty: keep results in memory only
  bool keep_control_trace = false;
  Seconds drain_limit = -1.0;  // < 0: same as duration
};

/// Population statistics of a sample.
struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Stats summarize(std::span<const double> xs);

/// Value at quantile q in [0, 1] of an ascending sample (linear interpolation).
double quantile_sorted(std::span<const double> sorted, double q);

struct IntersectionStats {
  std::string id;
  Stats queue;             // stop-line vehicles over all phases, per sample
  Stats cluster_size;      // vehicles per sensed cluster, per replan
  Stats cluster_duration;  // seconds per sensed cluster, per replan
};

struct TierRow {
  std::string label;
  Seconds start = 0.0;
  Seconds end = 0.0;
  std::size_t vehicles = 0;
  double mean_delay = 0.0;
};

struct StabilityTrace {
  std::vector<Seconds> time;
  std::vector<double> total_queue;  // sum of all stop-line queues
  std::size_t queue_count = 0;
  double epsilon = 0.0;
  double bound = 0.0;          // n^2 / (2 epsilon); 0 when epsilon is undeclared
  double time_average = 0.0;   // after warmup
  double tail_slope = 0.0;     // least squares over the final third, veh/s
  double tail_slope_stderr = 0.0;
};

struct RunReport {
  std::string scenario;
  ControllerMode mode = ControllerMode::baseline;
  std::uint64_t seed = 0;
  Seconds duration = 0.0;
  Seconds warmup = 0.0;

  std::vector<VehicleRecord> records;  // trips generated in [warmup, duration) that finished
  std::size_t unfinished = 0;          // trips from that window still out after the drain
  Stats delay;
  double p90_delay = 0.0;
  std::vector<double> delay_cdf;  // delay at quantiles 0, 0.01, ..., 1
  std::vector<IntersectionStats> intersections;
  std::vector<TierRow> tiers;
  StabilityTrace stability;

  SimCounters counters;
  std::size_t in_network = 0;
  std::size_t buffered = 0;
  std::uint64_t conservation_checks = 0;
  std::uint64_t messages_emitted = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_dropped = 0;
  std::uint64_t messages_rejected = 0;
  std::uint64_t fail_safes = 0;
  std::uint64_t control_hash = 0;            // FNV-1a over every requested phase
  std::vector<std::uint16_t> control_trace;  // [step * N + s], when kept
};

/// Runs the closed loop once per seed (seeds in parallel). Writes
/// DIR/seed_<n>/{vehicles,queues,weights,messages}.csv and summary.json
/// when cfg.out_dir is set.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

/// Single closed-loop run on an already validated network. After
/// `duration` no new trips are generated and the loop keeps running for at
/// most `drain_limit` seconds (negative: `duration`) so that trips from the
/// measurement window can finish; queue statistics cover [0, duration) only.
RunReport run_once(const ValidatedNetwork& net, ControllerMode mode, std::uint64_t seed, Seconds duration,
                   Seconds warmup, const std::filesystem::path& out_dir = {}, bool keep_control_trace = false,
                   const std::string& scenario_name = "inline", Seconds drain_limit = -1.0);

/// Per-tier mean delay by trip generation time. Without declared tiers the
/// whole run is a single tier.
std::vector<TierRow> emit_demand_tier_breakdown(const RunReport& report, std::span<const DemandTier> tiers);

/// (a - b) / a; zero when a is zero.
double relative_improvement(double a, double b);

struct SeedComparison {
  std::uint64_t seed = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double improvement = 0.0;
};

struct IntersectionComparison {
  std::string id;
  double queue_mean_a = 0.0;
  double queue_mean_b = 0.0;
  double queue_improvement = 0.0;
  double cluster_std_a = 0.0;
  double cluster_std_b = 0.0;
};

struct TierComparison {
  std::string label;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double improvement = 0.0;
};

struct ComparisonSummary {
  std::vector<SeedComparison> seeds;
  double mean_a = 0.0;  // mean over seeds of per-seed mean delay
  double mean_b = 0.0;
  double improvement = 0.0;
  double p90_a = 0.0;  // mean over seeds of the 90th percentile delay
  double p90_b = 0.0;
  double p90_improvement = 0.0;
  std::size_t seeds_b_worse = 0;  // seeds where b's mean delay is not lower
  std::vector<IntersectionComparison> intersections;
  std::vector<TierComparison> tiers;
  std::vector<double> cdf_a;  // seed-averaged quantile curves
  std::vector<double> cdf_b;
};

/// Paired comparison of two report sets over the same seeds. Throws Error
/// when the seed sets differ.
ComparisonSummary compare_reports(std::span<const RunReport> a, std::span<const RunReport> b);

std::string report_to_json(const RunReport& r);
RunReport report_from_json(const std::string& text);
std::string comparison_to_json(const ComparisonSummary& c);

/// Reads DIR/seed_*/summary.json in seed order.
std::vector<RunReport> load_reports(const std::filesystem::path& dir);

}  // namespace sigsched
