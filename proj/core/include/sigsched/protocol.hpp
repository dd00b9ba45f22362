#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sigsched/mean_field.hpp"
#include "sigsched/network.hpp"
#include "sigsched/scheduler.hpp"
#include "sigsched/sensing.hpp"
#include "sigsched/simulator.hpp"

namespace sigsched {

enum class ControllerMode { fixed_time, baseline, local_queue, composite };

std::string to_string(ControllerMode m);
ControllerMode controller_mode_from_string(const std::string& s);

enum class MessageKind { to_downstream, to_upstream };

std::string to_string(MessageKind k);

/// One queue value about a movement at the sender. `sender_phase` is the
/// sender's phase serving that movement, so the receiver can pick the
/// matching marginal out of `mu`.
struct PayloadEntry {
  std::size_t in_link = 0;
  std::size_t out_link = 0;
  std::size_t sender_phase = 0;
  double value = 0.0;

  friend bool operator==(const PayloadEntry&, const PayloadEntry&) = default;
};

struct QueueMessage {
  std::size_t sender = 0;
  std::size_t receiver = 0;
  MessageKind kind = MessageKind::to_downstream;
  std::vector<PayloadEntry> payload;
  std::vector<double> mu;  // sender's phase marginals
  Seconds timestamp = 0.0;

  friend bool operator==(const QueueMessage&, const QueueMessage&) = default;
};

/// Control settings an agent needs; taken from GlobalParams.
struct AgentConfig {
  ControllerMode mode = ControllerMode::composite;
  Seconds horizon = 60.0;
  Seconds replan_period = 5.0;
  Seconds offset = 0.0;  // first replan time
  Seconds cluster_gap = 3.0;
  double beta = 0.1;
  double damping = 0.3;
  double weight_floor = 1e-3;
  double ema_alpha = 0.1;
  Seconds turn_window = 60.0;
  double staleness_periods = 3.0;
  double sensor_noise_std = 0.0;
  std::vector<Seconds> fixed_time_green;
  std::uint64_t seed = 1;

  static AgentConfig from(const GlobalParams& p, ControllerMode mode, std::size_t agent_index);
};

/// Everything computed in one replan, kept for tracing.
struct ReplanTrace {
  Seconds time = 0.0;
  std::vector<double> queues;       // Q per phase
  std::vector<double> q_hat;        // effective queue per phase
  std::vector<double> mu;           // marginals after the update
  std::vector<double> weights;      // what the scheduler saw
  std::vector<ClusterSequence> sequences;
  bool fail_safe = false;
};

/// One intersection's controller. It only sees its own snapshot and the
/// messages in its inbound store.
class Agent {
 public:
  Agent(const ValidatedNetwork& net, std::size_t intersection, AgentConfig cfg);

  std::size_t id() const { return s_; }
  const AgentConfig& config() const { return cfg_; }
  Seconds next_replan() const { return next_replan_; }
  bool due(Seconds now) const { return now + 1e-9 >= next_replan_; }

  /// Queue messages for all neighbors built from a snapshot (steps 1-2).
  /// Empty for modes that do not exchange information.
  std::vector<QueueMessage> make_outbound(const IntersectionSnapshot& snap) const;

  /// Stores messages last-writer-wins per (sender, kind). Malformed or
  /// misaddressed messages are rejected and counted.
  void ingest(std::span<const QueueMessage> messages);

  /// Local queues and neighbor terms at time `now`; messages older than the
  /// staleness horizon are left out.
  DirectionalQueues directional_queues(const IntersectionSnapshot& snap, Seconds now);

  /// Sense, weigh, schedule and produce outbound messages (step 5).
  std::vector<QueueMessage> replan_cycle(const IntersectionSnapshot& snap);

  /// Phase to request at `now` given the live signal state and per-phase
  /// stop-line queues. Applies the max-green fail-safe.
  std::size_t decide(Seconds now, const SignalState& signal, std::span<const int> phase_queues) const;

  /// Folds per-movement discharge counts into the turn estimate once per window.
  void observe_turns(Seconds now, std::span<const std::uint64_t> discharged);

  const TurnEstimate& turns() const { return turns_; }
  TurnEstimate& mutable_turns() { return turns_; }
  const std::vector<double>& mu() const { return mu_; }
  void set_mu(std::vector<double> mu) { mu_ = std::move(mu); }
  const PhaseSchedule& current_schedule() const { return schedule_; }
  const ReplanTrace& last_trace() const { return trace_; }
  std::uint64_t rejected_messages() const { return rejected_; }
  std::uint64_t accepted_messages() const { return accepted_; }
  const std::map<std::pair<std::size_t, MessageKind>, QueueMessage>& inbound() const { return inbound_; }

 private:
  bool well_formed(const QueueMessage& m) const;
  double link_share(std::size_t in_link, std::size_t phase) const;

  const ValidatedNetwork* net_;
  std::size_t s_;
  AgentConfig cfg_;
  TurnEstimate turns_;
  std::vector<double> mu_;
  std::map<std::pair<std::size_t, MessageKind>, QueueMessage> inbound_;
  PhaseSchedule schedule_;
  ReplanTrace trace_;
  Seconds next_replan_ = 0.0;
  Seconds next_window_ = 0.0;
  std::vector<std::uint64_t> window_base_;
  std::mt19937_64 noise_rng_;
  std::uint64_t rejected_ = 0;
  std::uint64_t accepted_ = 0;
};

/// In-simulator transport with fixed delay and hashed, order-independent loss.
class MessageBus {
 public:
  MessageBus(Seconds delay, double loss, std::uint64_t seed) : delay_(delay), loss_(loss), seed_(seed) {}

  void post(QueueMessage m, Seconds now);
  /// Messages due at or before `now`, in (due time, sender, receiver, kind) order.
  std::vector<QueueMessage> deliver(Seconds now);

  std::uint64_t emitted() const { return emitted_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t dropped() const { return dropped_; }
  std::size_t in_flight() const { return pending_.size(); }

 private:
  bool lost(const QueueMessage& m) const;

  Seconds delay_;
  double loss_;
  std::uint64_t seed_;
  std::multimap<Seconds, QueueMessage> pending_;
  std::uint64_t emitted_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
};

/// Coupling of the whole network at one simulator state, built with the
/// same message assembly the live agents use (fresh messages, no loss).
CouplingModel build_coupling_model(const ValidatedNetwork& net, const SimState& state,
                                   std::span<const TurnEstimate> turns = {});

}  // namespace sigsched
