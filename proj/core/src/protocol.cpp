#include "sigsched/protocol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <tuple>

#include "sigsched/error.hpp"

namespace sigsched {

namespace {

constexpr double kEps = 1e-9;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::fixed_time: return "fixed_time";
    case ControllerMode::baseline: return "baseline";
    case ControllerMode::local_queue: return "local_queue";
    case ControllerMode::composite: return "composite";
  }
  return "?";
}

ControllerMode controller_mode_from_string(const std::string& s) {
  if (s == "fixed_time") return ControllerMode::fixed_time;
  if (s == "baseline") return ControllerMode::baseline;
  if (s == "local_queue") return ControllerMode::local_queue;
  if (s == "composite") return ControllerMode::composite;
  throw ValidationError("unknown controller mode '" + s + "'");
}

std::string to_string(MessageKind k) { return k == MessageKind::to_downstream ? "to_downstream" : "to_upstream"; }

AgentConfig AgentConfig::from(const GlobalParams& p, ControllerMode mode, std::size_t agent_index) {
  AgentConfig c;
  c.mode = mode;
  c.horizon = p.horizon;
  c.replan_period = p.replan_period;
  c.cluster_gap = p.cluster_gap;
  c.beta = p.mf_beta;
  c.damping = p.mf_damping;
  c.weight_floor = p.weight_floor;
  c.ema_alpha = p.ema_alpha;
  c.turn_window = p.turn_window;
  c.staleness_periods = p.staleness_periods;
  c.sensor_noise_std = p.sensor_noise_std;
  c.fixed_time_green = p.fixed_time_green;
  c.seed = splitmix(p.seed ^ splitmix(agent_index + 1));
  // Offsets land on step boundaries inside the first replan period.
  const auto slots = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(p.replan_period / p.dt + kEps)));
  c.offset = static_cast<double>(static_cast<std::int64_t>(c.seed % static_cast<std::uint64_t>(slots))) * p.dt;
  return c;
}

Agent::Agent(const ValidatedNetwork& net, std::size_t intersection, AgentConfig cfg)
    : net_(&net),
      s_(intersection),
      cfg_(std::move(cfg)),
      turns_(net.intersection(intersection), cfg_.ema_alpha),
      next_replan_(cfg_.offset),
      noise_rng_(cfg_.seed) {
  const std::size_t P = net.intersection(s_).num_phases();
  mu_.assign(P, 1.0 / static_cast<double>(P));
  schedule_.hold_phase = 0;
}

std::vector<QueueMessage> Agent::make_outbound(const IntersectionSnapshot& snap) const {
  std::vector<QueueMessage> out;
  if (cfg_.mode != ControllerMode::composite) return out;
  const Intersection& x = net_->intersection(s_);

  // queued vehicles per link and per movement
  std::map<std::size_t, double> link_q;
  std::vector<double> move_q(x.movements.size(), 0.0);
  for (const auto& a : snap.approaches) {
    link_q[a.link] = static_cast<double>(a.queued.size());
    for (std::size_t m : a.queued) move_q[m] += 1.0;
  }

  std::map<std::pair<std::size_t, MessageKind>, QueueMessage> msgs;
  auto message_for = [&](std::size_t t, MessageKind k) -> QueueMessage& {
    auto [it, fresh] = msgs.try_emplace({t, k});
    if (fresh) {
      it->second.sender = s_;
      it->second.receiver = t;
      it->second.kind = k;
      it->second.mu = mu_;
      it->second.timestamp = snap.now;
    }
    return it->second;
  };

  for (std::size_t m = 0; m < x.movements.size(); ++m) {
    const Movement& mv = x.movements[m];
    const Link& out_link = net_->link(mv.out_link);
    if (out_link.to.is_intersection()) {
      // proportioned share of the in-link queue heading to that neighbor
      message_for(out_link.to.index, MessageKind::to_downstream)
          .payload.push_back({mv.in_link, mv.out_link, mv.phase, turns_.zeta(m) * link_q[mv.in_link]});
    }
    const Link& in_link = net_->link(mv.in_link);
    if (in_link.from.is_intersection()) {
      message_for(in_link.from.index, MessageKind::to_upstream)
          .payload.push_back({mv.in_link, mv.out_link, mv.phase, move_q[m]});
    }
  }
  out.reserve(msgs.size());
  for (auto& [key, m] : msgs) out.push_back(std::move(m));
  return out;
}

bool Agent::well_formed(const QueueMessage& m) const {
  if (m.receiver != s_ || !std::isfinite(m.timestamp)) return false;
  const Intersection& x = net_->intersection(s_);
  if (!std::binary_search(x.neighbors.begin(), x.neighbors.end(), m.sender)) return false;
  const std::size_t sender_phases = net_->intersection(m.sender).num_phases();
  if (m.mu.size() != sender_phases) return false;
  double total = 0.0;
  for (double v : m.mu) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) return false;
  for (const auto& e : m.payload) {
    if (!(std::isfinite(e.value) && e.value >= 0.0) || e.sender_phase >= sender_phases) return false;
    if (e.in_link >= net_->links().size() || e.out_link >= net_->links().size()) return false;
    const Link& shared = net_->link(m.kind == MessageKind::to_downstream ? e.out_link : e.in_link);
    const Endpoint want_from{Endpoint::Kind::intersection, m.kind == MessageKind::to_downstream ? m.sender : s_};
    const Endpoint want_to{Endpoint::Kind::intersection, m.kind == MessageKind::to_downstream ? s_ : m.sender};
    if (!(shared.from == want_from) || !(shared.to == want_to)) return false;
  }
  return true;
}

void Agent::ingest(std::span<const QueueMessage> messages) {
  for (const auto& m : messages) {
    if (!well_formed(m)) {
      ++rejected_;
      continue;
    }
    ++accepted_;
    auto [it, fresh] = inbound_.try_emplace({m.sender, m.kind}, m);
    if (!fresh && m.timestamp >= it->second.timestamp) it->second = m;
  }
}

double Agent::link_share(std::size_t in_link, std::size_t phase) const {
  const Intersection& x = net_->intersection(s_);
  double f = 0.0;
  for (std::size_t m : x.phase_movements[phase]) {
    if (x.movements[m].in_link == in_link) f += turns_.zeta(m);
  }
  return f;
}

DirectionalQueues Agent::directional_queues(const IntersectionSnapshot& snap, Seconds now) {
  const Intersection& x = net_->intersection(s_);
  DirectionalQueues d;
  d.local.resize(x.num_phases());
  for (std::size_t p = 0; p < x.num_phases(); ++p) {
    d.local[p] = estimate_queue(snap, x, p, cfg_.sensor_noise_std, &noise_rng_);
  }
  if (cfg_.mode != ControllerMode::composite) return d;

  const Seconds max_age = cfg_.staleness_periods * cfg_.replan_period;
  for (const auto& [key, m] : inbound_) {
    if (now - m.timestamp > max_age + kEps) continue;
    for (const auto& e : m.payload) {
      const double mu = m.mu[e.sender_phase];
      if (m.kind == MessageKind::to_downstream) {
        // e.out_link enters here; spread over the phases serving it
        for (std::size_t p = 0; p < x.num_phases(); ++p) {
          const double f = link_share(e.out_link, p);
          if (f > 0.0) d.terms.push_back({p, f * e.value, 0.0, mu, m.sender, e.sender_phase});
        }
      } else {
        // e.in_link leaves here; charge each movement feeding it by its outflow share
        for (std::size_t k = 0; k < x.movements.size(); ++k) {
          if (x.movements[k].out_link != e.in_link) continue;
          d.terms.push_back({x.movements[k].phase, 0.0, turns_.eta(k) * e.value, mu, m.sender, e.sender_phase});
        }
      }
    }
  }
  return d;
}

std::vector<QueueMessage> Agent::replan_cycle(const IntersectionSnapshot& snap) {
  const Intersection& x = net_->intersection(s_);
  const Seconds now = snap.now;
  while (next_replan_ <= now + kEps) next_replan_ += cfg_.replan_period;

  trace_ = ReplanTrace{};
  trace_.time = now;
  if (cfg_.mode == ControllerMode::fixed_time) return {};

  const auto d = directional_queues(snap, now);
  trace_.queues = d.local;
  trace_.q_hat = effective_queues(d);

  const std::size_t P = x.num_phases();
  std::vector<double> weights(P, 1.0);
  if (cfg_.mode != ControllerMode::baseline) {
    mu_ = update_marginals(trace_.q_hat, x.h_phase, cfg_.beta, mu_, cfg_.damping);
    for (std::size_t p = 0; p < P; ++p) weights[p] = std::max(mu_[p], cfg_.weight_floor);
  }
  trace_.mu = mu_;
  trace_.weights = weights;

  SchedulerInput in;
  for (std::size_t p = 0; p < P; ++p) {
    in.sequences.push_back(build_cluster_sequence(snap, x, p, cfg_.horizon, cfg_.cluster_gap));
  }
  in.weights = weights;
  in.changeover_time = x.changeover_time;
  in.max_green = x.max_green;
  in.min_green = x.min_green;
  in.current_phase = snap.signal.committed();
  in.now = now;
  if (snap.signal.in_changeover()) {
    in.ready_time = now + snap.signal.changeover_left;
  } else {
    in.green_elapsed = snap.signal.green_elapsed;
  }
  trace_.sequences = in.sequences;
  try {
    schedule_ = schedule(in);
  } catch (const Error&) {
    schedule_ = PhaseSchedule{};
    schedule_.hold_phase = in.current_phase;
    trace_.fail_safe = true;
  }
  return make_outbound(snap);
}

std::size_t Agent::decide(Seconds now, const SignalState& signal, std::span<const int> phase_queues) const {
  const Intersection& x = net_->intersection(s_);
  const std::size_t P = x.num_phases();
  if (signal.in_changeover()) return signal.target;

  if (cfg_.mode == ControllerMode::fixed_time) {
    const Seconds g = signal.active < cfg_.fixed_time_green.size() ? cfg_.fixed_time_green[signal.active] : 30.0;
    return signal.green_elapsed + kEps >= g ? (signal.active + 1) % P : signal.active;
  }

  std::size_t desired = signal.active;
  for (const auto& e : schedule_.entries) {
    if (e.finish > now + kEps) {
      desired = e.phase;
      break;
    }
  }
  if (desired == signal.active && signal.green_elapsed + kEps >= x.max_green) {
    std::size_t best = signal.active;
    int best_q = 0;
    for (std::size_t p = 0; p < P; ++p) {
      if (p != signal.active && phase_queues[p] > best_q) {
        best = p;
        best_q = phase_queues[p];
      }
    }
    desired = best;
  }
  return desired;
}

void Agent::observe_turns(Seconds now, std::span<const std::uint64_t> discharged) {
  if (window_base_.empty()) {
    window_base_.assign(discharged.begin(), discharged.end());
    next_window_ = now + cfg_.turn_window;
    return;
  }
  if (now + kEps < next_window_) return;
  std::vector<double> counts(discharged.size());
  for (std::size_t m = 0; m < discharged.size(); ++m) {
    counts[m] = static_cast<double>(discharged[m] - window_base_[m]);
  }
  turns_.update(counts);
  window_base_.assign(discharged.begin(), discharged.end());
  while (next_window_ <= now + kEps) next_window_ += cfg_.turn_window;
}

bool MessageBus::lost(const QueueMessage& m) const {
  if (loss_ <= 0.0) return false;
  std::uint64_t h = splitmix(seed_ ^ 0x6D657373616765ull);
  h = splitmix(h ^ m.sender);
  h = splitmix(h ^ m.receiver);
  h = splitmix(h ^ static_cast<std::uint64_t>(m.kind));
  h = splitmix(h ^ std::bit_cast<std::uint64_t>(m.timestamp));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < loss_;
}

void MessageBus::post(QueueMessage m, Seconds now) {
  ++emitted_;
  if (lost(m)) {
    ++dropped_;
    return;
  }
  pending_.emplace(now + delay_, std::move(m));
}

std::vector<QueueMessage> MessageBus::deliver(Seconds now) {
  std::vector<std::pair<Seconds, QueueMessage>> due;
  auto end = pending_.upper_bound(now + kEps);
  for (auto it = pending_.begin(); it != end; ++it) due.emplace_back(it->first, std::move(it->second));
  pending_.erase(pending_.begin(), end);
  std::sort(due.begin(), due.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second.sender, a.second.receiver, a.second.kind, a.second.timestamp) <
           std::tie(b.first, b.second.sender, b.second.receiver, b.second.kind, b.second.timestamp);
  });
  std::vector<QueueMessage> out;
  out.reserve(due.size());
  for (auto& [t, m] : due) out.push_back(std::move(m));
  delivered_ += out.size();
  return out;
}

CouplingModel build_coupling_model(const ValidatedNetwork& net, const SimState& state,
                                   std::span<const TurnEstimate> turns) {
  const std::size_t N = net.intersections().size();
  std::vector<Agent> agents;
  std::vector<IntersectionSnapshot> snaps;
  agents.reserve(N);
  for (std::size_t s = 0; s < N; ++s) {
    auto cfg = AgentConfig::from(net.params(), ControllerMode::composite, s);
    cfg.sensor_noise_std = 0.0;
    agents.emplace_back(net, s, cfg);
    if (s < turns.size()) agents.back().mutable_turns() = turns[s];
    snaps.push_back(snapshot(state, net, s));
  }
  std::vector<std::vector<QueueMessage>> inbox(N);
  for (std::size_t s = 0; s < N; ++s) {
    for (auto& m : agents[s].make_outbound(snaps[s])) inbox[m.receiver].push_back(std::move(m));
  }
  CouplingModel model;
  for (std::size_t s = 0; s < N; ++s) {
    agents[s].ingest(inbox[s]);
    model.nodes.push_back(agents[s].directional_queues(snaps[s], state.clock));
    model.h_phase.push_back(net.intersection(s).h_phase);
  }
  return model;
}

}  // namespace sigsched
