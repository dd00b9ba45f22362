#include "sigsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sigsched/error.hpp"

namespace sigsched {

namespace {

constexpr double kEps = 1e-9;
constexpr std::size_t kMaxRouteHops = 10000;

const Link& link_of(const ValidatedNetwork& net, std::size_t l) { return net.links()[l]; }

/// Appends movements/free-flow bookkeeping for a fully specified route.
void annotate_route(Vehicle& v, const ValidatedNetwork& net) {
  v.movements.assign(v.route.size(), kNone);
  v.free_flow_time = 0.0;
  for (std::size_t k = 0; k < v.route.size(); ++k) {
    const auto& l = link_of(net, v.route[k]);
    v.free_flow_time += l.free_flow_time();
    if (k + 1 < v.route.size()) {
      if (!l.to.is_intersection()) throw InvariantViolation("route leaves the network early");
      auto m = net.intersection(l.to.index).movement_index(v.route[k], v.route[k + 1]);
      if (!m) throw InvariantViolation("route uses an undeclared movement at " + net.intersection(l.to.index).id);
      v.movements[k] = *m;
    } else if (l.to.is_intersection()) {
      throw InvariantViolation("route does not end at a boundary");
    }
  }
}

std::vector<std::size_t> sample_route(const Source& src, const ValidatedNetwork& net, std::mt19937_64& rng) {
  std::vector<std::size_t> route{src.link};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (link_of(net, route.back()).to.is_intersection()) {
    if (route.size() > kMaxRouteHops) throw InvariantViolation("route sampling did not reach a boundary");
    const std::size_t s = link_of(net, route.back()).to.index;
    const TurnTable& table = src.turns[s].at(route.back());
    const double u = unit(rng);
    double acc = 0.0;
    std::size_t pick = table.movements.back();
    for (std::size_t k = 0; k < table.movements.size(); ++k) {
      acc += table.probabilities[k];
      if (u < acc) {
        pick = table.movements[k];
        break;
      }
    }
    route.push_back(net.intersection(s).movements[pick].out_link);
  }
  return route;
}

void enter_link(SimState& st, Vehicle& v, std::size_t hop, Seconds t) {
  v.hop = hop;
  v.position = 0.0;
  v.queued = false;
  v.link_entry[hop] = t;
  st.links[v.route[hop]].moving.push_back(v.id);
}

void check_conservation(const SimState& st) {
  const std::size_t buffered = st.buffered();
  const std::size_t on_links = st.on_links();
  if (st.counters.generated != buffered + on_links + st.counters.exited) {
    std::ostringstream os;
    os << "vehicle conservation violated at t=" << st.clock << ": generated=" << st.counters.generated
       << " buffered=" << buffered << " on_links=" << on_links << " exited=" << st.counters.exited;
    throw InvariantViolation(os.str());
  }
}

}  // namespace

std::size_t SimState::buffered() const {
  std::size_t n = 0;
  for (const auto& b : boundary_buffers) n += b.size();
  return n;
}

std::size_t SimState::on_links() const {
  std::size_t n = 0;
  for (const auto& l : links) n += l.moving.size() + l.queue.size();
  return n;
}

SimState make_initial_state(const ValidatedNetwork& net, std::uint64_t seed) {
  SimState st;
  st.links.resize(net.links().size());
  st.signals.resize(net.intersections().size());
  st.boundary_buffers.resize(net.sources().size());
  st.discharged.resize(net.intersections().size());
  for (std::size_t s = 0; s < net.intersections().size(); ++s) {
    st.discharged[s].assign(net.intersection(s).movements.size(), 0);
  }
  st.rng.seed(seed);
  return st;
}

VehicleId place_vehicle(SimState& st, const ValidatedNetwork& net, std::vector<std::size_t> route, bool queued) {
  if (route.empty()) throw InvariantViolation("empty route");
  Vehicle v;
  v.id = st.vehicles.size();
  v.entry_time = st.clock;
  v.route = std::move(route);
  v.link_entry.assign(v.route.size(), 0.0);
  annotate_route(v, net);
  auto& ls = st.links[v.route[0]];
  if (ls.occupancy() >= link_of(net, v.route[0]).capacity) throw InvariantViolation("placement exceeds capacity");
  v.link_entry[0] = st.clock;
  if (queued) {
    if (!link_of(net, v.route[0]).to.is_intersection()) throw InvariantViolation("cannot queue on an exit link");
    v.position = link_of(net, v.route[0]).length;
    v.queued = true;
    ls.queue.push_back(v.id);
  } else {
    ls.moving.push_back(v.id);
  }
  st.vehicles.push_back(std::move(v));
  ++st.counters.generated;
  ++st.counters.admitted;
  return st.vehicles.back().id;
}

void inject_vehicles(SimState& st, const ValidatedNetwork& net, bool generate) {
  const Seconds dt = net.params().dt;
  for (std::size_t k = 0; k < net.sources().size(); ++k) {
    const Source& src = net.sources()[k];
    const double lambda = generate ? src.rate_vph_at(st.clock) / 3600.0 * dt : 0.0;
    if (lambda > 0.0) {
      std::poisson_distribution<int> arrivals(lambda);
      const int n = arrivals(st.rng);
      for (int i = 0; i < n; ++i) {
        Vehicle v;
        v.id = st.vehicles.size();
        v.source = k;
        v.entry_time = st.clock;
        v.route = sample_route(src, net, st.rng);
        v.link_entry.assign(v.route.size(), 0.0);
        annotate_route(v, net);
        st.boundary_buffers[k].push_back(v.id);
        st.vehicles.push_back(std::move(v));
        ++st.counters.generated;
      }
    }
    auto& buffer = st.boundary_buffers[k];
    auto& first = st.links[src.link];
    while (!buffer.empty() && first.occupancy() < link_of(net, src.link).capacity) {
      Vehicle& v = st.vehicles[buffer.front()];
      buffer.pop_front();
      enter_link(st, v, 0, st.clock);
      ++st.counters.admitted;
    }
  }
}

void step(SimState& st, const ValidatedNetwork& net, std::span<const std::size_t> controls) {
  const Seconds dt = net.params().dt;
  const Seconds t_end = static_cast<double>(st.step + 1) * dt;
  if (controls.size() != net.intersections().size()) {
    throw InvariantViolation("controls must name one phase per intersection");
  }

  // Movement along links.
  for (std::size_t l = 0; l < st.links.size(); ++l) {
    const Link& link = link_of(net, l);
    auto& ls = st.links[l];
    for (VehicleId id : ls.moving) st.vehicles[id].position += link.free_flow_speed * dt;
    while (!ls.moving.empty() && st.vehicles[ls.moving.front()].position >= link.length - kEps) {
      Vehicle& v = st.vehicles[ls.moving.front()];
      ls.moving.pop_front();
      v.position = link.length;
      if (link.to.is_intersection()) {
        v.queued = true;
        ls.queue.push_back(v.id);
      } else {
        v.exited = true;
        ++st.counters.exited;
        st.exited.push_back({v.id, v.source, v.entry_time, t_end, v.free_flow_time,
                             trip_delay(v.entry_time, t_end, v.free_flow_time)});
      }
    }
  }

  // Signals.
  for (std::size_t s = 0; s < net.intersections().size(); ++s) {
    const Intersection& x = net.intersection(s);
    SignalState& sig = st.signals[s];
    if (controls[s] >= x.num_phases()) throw InvariantViolation("control names an unknown phase at " + x.id);
    if (sig.in_changeover()) {
      sig.changeover_left -= dt;
      if (sig.changeover_left <= kEps) {
        sig.changeover_left = 0.0;
        sig.active = sig.target;
        sig.green_elapsed = 0.0;
      }
    } else if (controls[s] != sig.active && sig.green_elapsed >= x.min_green - kEps) {
      ++st.counters.phase_switches;
      for (std::size_t l : x.in_links) st.links[l].discharge_credit = 0.0;
      if (x.changeover_time > 0.0) {
        sig.target = controls[s];
        sig.changeover_left = x.changeover_time;
      } else {
        sig.active = sig.target = controls[s];
        sig.green_elapsed = 0.0;
      }
    }
  }

  // Discharge under green.
  for (std::size_t s = 0; s < net.intersections().size(); ++s) {
    const Intersection& x = net.intersection(s);
    SignalState& sig = st.signals[s];
    if (sig.in_changeover()) continue;
    for (std::size_t l : x.in_links) {
      auto& ls = st.links[l];
      const double rate = link_of(net, l).saturation_rate;
      bool serves_active = false;
      for (std::size_t m : x.phase_movements[sig.active]) serves_active = serves_active || x.movements[m].in_link == l;
      if (!serves_active) {
        ls.discharge_credit = 0.0;
        continue;
      }
      if (ls.queue.empty()) {
        // Idle green banks at most one vehicle's worth of service.
        ls.discharge_credit = std::min(ls.discharge_credit + rate * dt, 1.0);
        continue;
      }
      auto head_green = [&] {
        return !ls.queue.empty() && x.movements[st.vehicles[ls.queue.front()].movement()].phase == sig.active;
      };
      if (!head_green()) {
        ls.discharge_credit = 0.0;
        continue;
      }
      ls.discharge_credit += rate * dt;
      bool blocked = false;
      while (ls.discharge_credit >= 1.0 - kEps && head_green()) {
        Vehicle& v = st.vehicles[ls.queue.front()];
        const std::size_t next = v.route[v.hop + 1];
        if (st.links[next].occupancy() >= link_of(net, next).capacity) {
          blocked = true;
          ++st.counters.blocked_discharges;
          break;
        }
        ls.queue.pop_front();
        ls.discharge_credit -= 1.0;
        ++st.discharged[s][v.movement()];
        enter_link(st, v, v.hop + 1, t_end);
      }
      if (blocked || ls.queue.empty()) ls.discharge_credit = std::min(ls.discharge_credit, 1.0);
    }
    sig.green_elapsed += dt;

    if (sig.green_elapsed > x.max_green + dt + kEps) {
      bool conflicting = false;
      for (std::size_t l : x.in_links) {
        for (VehicleId id : st.links[l].queue) {
          if (x.movements[st.vehicles[id].movement()].phase != sig.active) {
            conflicting = true;
            break;
          }
        }
        if (conflicting) break;
      }
      if (conflicting) ++st.counters.max_green_violations;
    }
  }

  ++st.step;
  st.clock = t_end;

  for (std::size_t l = 0; l < st.links.size(); ++l) {
    if (st.links[l].occupancy() > link_of(net, l).capacity) {
      throw InvariantViolation("link '" + link_of(net, l).id + "' exceeds capacity");
    }
  }
  check_conservation(st);
}

MetricsSample measure(const SimState& st, const ValidatedNetwork& net, std::size_t records_from) {
  MetricsSample m;
  m.time = st.clock;
  if (records_from < st.exited.size()) {
    m.new_records.assign(st.exited.begin() + static_cast<std::ptrdiff_t>(records_from), st.exited.end());
  }
  m.link_queues.assign(net.links().size(), 0);
  m.phase_queues.resize(net.intersections().size());
  for (std::size_t s = 0; s < net.intersections().size(); ++s) {
    const Intersection& x = net.intersection(s);
    m.phase_queues[s].assign(x.num_phases(), 0);
    for (std::size_t l : x.in_links) {
      for (VehicleId id : st.links[l].queue) ++m.phase_queues[s][x.movements[st.vehicles[id].movement()].phase];
      m.link_queues[l] = static_cast<int>(st.links[l].queue.size());
      m.total_queue += m.link_queues[l];
    }
  }
  return m;
}

IntersectionSnapshot snapshot(const SimState& st, const ValidatedNetwork& net, std::size_t s) {
  const Intersection& x = net.intersection(s);
  IntersectionSnapshot snap;
  snap.intersection = s;
  snap.now = st.clock;
  snap.signal = st.signals[s];
  snap.discharged = st.discharged[s];
  snap.approaches.reserve(x.in_links.size());
  for (std::size_t l : x.in_links) {
    const Link& link = link_of(net, l);
    const auto& ls = st.links[l];
    ApproachSnapshot a;
    a.link = l;
    a.saturation_rate = link.saturation_rate;
    a.queued.reserve(ls.queue.size());
    for (VehicleId id : ls.queue) a.queued.push_back(st.vehicles[id].movement());
    a.moving.reserve(ls.moving.size());
    for (VehicleId id : ls.moving) {
      const Vehicle& v = st.vehicles[id];
      a.moving.push_back({(link.length - v.position) / link.free_flow_speed, v.movement()});
    }
    snap.approaches.push_back(std::move(a));
  }
  return snap;
}

Simulator::Simulator(std::shared_ptr<const ValidatedNetwork> net, std::uint64_t seed)
    : net_(std::move(net)), state_(make_initial_state(*net_, seed)) {}

}  // namespace sigsched
