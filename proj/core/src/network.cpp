#include "sigsched/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sigsched/error.hpp"

namespace sigsched {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

void sort_unique(std::vector<std::size_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

void validate_params(const GlobalParams& p) {
  if (!(p.dt > 0.0)) fail("params.dt must be > 0");
  if (!(p.replan_period > 0.0)) fail("params.replan_period must be > 0");
  if (!(p.horizon >= p.replan_period)) fail("params.horizon must be >= replan_period");
  if (!(p.mf_beta > 0.0)) fail("params.mf_beta must be > 0");
  if (!(p.mf_damping >= 0.0 && p.mf_damping < 1.0)) fail("params.mf_damping must be in [0,1)");
  if (!(p.cluster_gap >= 0.0)) fail("params.cluster_gap must be >= 0");
  if (!(p.weight_floor > 0.0 && p.weight_floor <= 1.0)) fail("params.weight_floor must be in (0,1]");
  if (!(p.ema_alpha > 0.0 && p.ema_alpha <= 1.0)) fail("params.ema_alpha must be in (0,1]");
  if (!(p.turn_window > 0.0)) fail("params.turn_window must be > 0");
  if (!(p.staleness_periods > 0.0)) fail("params.staleness_periods must be > 0");
  if (p.message_delay_steps < 1) fail("params.message_delay_steps must be >= 1");
  if (!(p.message_loss >= 0.0 && p.message_loss <= 1.0)) fail("params.message_loss must be in [0,1]");
  if (!(p.sensor_noise_std >= 0.0)) fail("params.sensor_noise_std must be >= 0");
  if (!(p.warmup >= 0.0)) fail("params.warmup must be >= 0");
  if (!(p.queue_sample_period > 0.0)) fail("params.queue_sample_period must be > 0");
  if (!(p.stability_epsilon >= 0.0)) fail("params.stability_epsilon must be >= 0");
  for (double g : p.fixed_time_green) {
    if (!(g > 0.0)) fail("params.fixed_time_green entries must be > 0");
  }
  for (const auto& t : p.tiers) {
    if (!(t.end > t.start)) fail("tier '" + t.label + "' has end <= start");
  }
}

}  // namespace

std::optional<std::size_t> Intersection::movement_index(std::size_t in_link,
                                                        std::size_t out_link) const {
  for (std::size_t m = 0; m < movements.size(); ++m) {
    if (movements[m].in_link == in_link && movements[m].out_link == out_link) return m;
  }
  return std::nullopt;
}

double Source::rate_vph_at(Seconds t) const {
  for (const auto& iv : schedule) {
    if (t >= iv.start && t < iv.end) return iv.rate_vph;
  }
  return 0.0;
}

std::optional<std::size_t> ValidatedNetwork::find_intersection(const std::string& id) const {
  auto it = intersection_index_.find(id);
  if (it == intersection_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ValidatedNetwork::find_link(const std::string& id) const {
  auto it = link_index_.find(id);
  if (it == link_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ValidatedNetwork::phase_count() const {
  std::size_t n = 0;
  for (const auto& x : intersections_) n += x.num_phases();
  return n;
}

std::size_t ValidatedNetwork::queue_count() const {
  std::size_t n = 0;
  for (const auto& x : intersections_) n += x.in_links.size();
  return n;
}

ValidatedNetwork validate_network(NetworkSpec spec) {
  validate_params(spec.params);

  ValidatedNetwork net;
  std::map<std::string, std::size_t> boundary_index;
  for (std::size_t b = 0; b < spec.boundaries.size(); ++b) {
    if (!boundary_index.emplace(spec.boundaries[b], b).second) {
      fail("duplicate boundary id '" + spec.boundaries[b] + "'");
    }
  }
  for (std::size_t i = 0; i < spec.intersections.size(); ++i) {
    const auto& id = spec.intersections[i].id;
    if (boundary_index.count(id)) fail("id '" + id + "' is both a boundary and an intersection");
    if (!net.intersection_index_.emplace(id, i).second) {
      fail("duplicate intersection id '" + id + "'");
    }
  }

  auto resolve = [&](const std::string& name, const std::string& link_id) -> Endpoint {
    if (auto it = net.intersection_index_.find(name); it != net.intersection_index_.end()) {
      return {Endpoint::Kind::intersection, it->second};
    }
    if (auto it = boundary_index.find(name); it != boundary_index.end()) {
      return {Endpoint::Kind::boundary, it->second};
    }
    fail("link '" + link_id + "' has dangling endpoint '" + name + "'");
  };

  net.links_.reserve(spec.links.size());
  for (std::size_t l = 0; l < spec.links.size(); ++l) {
    const auto& ls = spec.links[l];
    if (!net.link_index_.emplace(ls.id, l).second) fail("duplicate link id '" + ls.id + "'");
    Link link;
    link.id = ls.id;
    link.from = resolve(ls.from, ls.id);
    link.to = resolve(ls.to, ls.id);
    if (!link.from.is_intersection() && !link.to.is_intersection()) {
      fail("link '" + ls.id + "' connects two boundaries");
    }
    if (!(ls.length > 0.0)) fail("link '" + ls.id + "' length must be > 0");
    if (!(ls.free_flow_speed > 0.0)) fail("link '" + ls.id + "' free_flow_speed must be > 0");
    if (!(ls.saturation_rate > 0.0)) fail("link '" + ls.id + "' has non-positive saturation rate");
    if (ls.capacity < 1) fail("link '" + ls.id + "' capacity must be >= 1");
    link.length = ls.length;
    link.free_flow_speed = ls.free_flow_speed;
    link.saturation_rate = ls.saturation_rate;
    link.capacity = ls.capacity;
    net.links_.push_back(std::move(link));
  }

  auto link_id = [&](const std::string& name, const std::string& ctx) {
    auto it = net.link_index_.find(name);
    if (it == net.link_index_.end()) fail(ctx + ": unknown link '" + name + "'");
    return it->second;
  };

  net.intersections_.resize(spec.intersections.size());
  for (std::size_t s = 0; s < spec.intersections.size(); ++s) {
    const auto& is = spec.intersections[s];
    auto& x = net.intersections_[s];
    x.id = is.id;
    if (is.phases.size() < 2) fail("intersection '" + is.id + "' needs at least 2 phases");
    if (!(is.changeover_time >= 0.0)) fail("intersection '" + is.id + "' changeover_time < 0");
    if (!(is.max_green > 0.0)) fail("intersection '" + is.id + "' max_green must be > 0");
    if (!(is.min_green >= 0.0)) fail("intersection '" + is.id + "' min_green < 0");
    if (is.min_green > is.max_green) fail("intersection '" + is.id + "' min_green > max_green");
    x.changeover_time = is.changeover_time;
    x.max_green = is.max_green;
    x.min_green = is.min_green;

    for (std::size_t l = 0; l < net.links_.size(); ++l) {
      const auto& link = net.links_[l];
      if (link.to.is_intersection() && link.to.index == s) x.in_links.push_back(l);
      if (link.from.is_intersection() && link.from.index == s) x.out_links.push_back(l);
    }

    x.phase_movements.resize(is.phases.size());
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> served_by;
    std::size_t h_count = 0;
    std::size_t v_count = 0;
    std::optional<std::size_t> h_phase;
    for (std::size_t p = 0; p < is.phases.size(); ++p) {
      const auto& ps = is.phases[p];
      const std::string ctx = "intersection '" + is.id + "' phase " + std::to_string(p);
      if (ps.id != p) fail(ctx + ": phase ids must be 0..P-1 in order");
      if (ps.movements.empty()) fail(ctx + " serves no movement");
      if (ps.edge_class) {
        if (*ps.edge_class == EdgeClass::h) {
          ++h_count;
          if (!h_phase) h_phase = p;
        } else {
          ++v_count;
        }
      }
      for (const auto& mv : ps.movements) {
        const std::size_t in = link_id(mv.in_link, ctx);
        const std::size_t out = link_id(mv.out_link, ctx);
        const auto& in_l = net.links_[in];
        const auto& out_l = net.links_[out];
        if (!(in_l.to.is_intersection() && in_l.to.index == s)) {
          fail(ctx + ": in_link '" + mv.in_link + "' does not end here");
        }
        if (!(out_l.from.is_intersection() && out_l.from.index == s)) {
          fail(ctx + ": out_link '" + mv.out_link + "' does not start here");
        }
        if (!served_by.emplace(std::make_pair(in, out), p).second) {
          fail(ctx + ": movement " + mv.in_link + "->" + mv.out_link + " multiply served");
        }
        x.phase_movements[p].push_back(x.movements.size());
        x.movements.push_back(Movement{in, out, p});
      }
    }
    for (std::size_t in : x.in_links) {
      bool any = std::any_of(x.movements.begin(), x.movements.end(),
                             [&](const Movement& m) { return m.in_link == in; });
      if (!any) {
        fail("intersection '" + is.id + "': in_link '" + net.links_[in].id +
             "' has no movement served by any phase");
      }
    }
    if (h_count + v_count > 0 && is.phases.size() == 2 && (h_count != 1 || v_count != 1)) {
      fail("intersection '" + is.id + "': two-phase edge_class must be one h and one v");
    }
    x.h_phase = h_phase.value_or(0);

    x.upstream.resize(is.phases.size());
    x.downstream.resize(is.phases.size());
    for (const auto& m : x.movements) {
      const auto& in_l = net.links_[m.in_link];
      const auto& out_l = net.links_[m.out_link];
      if (in_l.from.is_intersection()) x.upstream[m.phase].push_back(in_l.from.index);
      if (out_l.to.is_intersection()) x.downstream[m.phase].push_back(out_l.to.index);
    }
    for (auto& v : x.upstream) sort_unique(v);
    for (auto& v : x.downstream) sort_unique(v);
    for (std::size_t l : x.in_links) {
      if (net.links_[l].from.is_intersection()) x.neighbors.push_back(net.links_[l].from.index);
    }
    for (std::size_t l : x.out_links) {
      if (net.links_[l].to.is_intersection()) x.neighbors.push_back(net.links_[l].to.index);
    }
    sort_unique(x.neighbors);
  }

  // Demand and route policies.
  for (const auto& d : spec.demand) {
    Source src;
    src.link = link_id(d.source, "demand");
    if (net.links_[src.link].from.is_intersection()) {
      fail("demand source '" + d.source + "' does not start at a boundary");
    }
    Seconds prev_end = -std::numeric_limits<double>::infinity();
    for (const auto& iv : d.schedule) {
      if (!(iv.end > iv.start)) fail("demand '" + d.source + "': interval end <= start");
      if (iv.start < prev_end) fail("demand '" + d.source + "': intervals overlap or are unordered");
      if (!(iv.rate_vph >= 0.0)) fail("demand '" + d.source + "': negative rate");
      prev_end = iv.end;
    }
    src.schedule = d.schedule;
    src.turns.resize(net.intersections_.size());

    for (const auto& [xid, per_in] : d.route_policy) {
      auto xs = net.intersection_index_.find(xid);
      if (xs == net.intersection_index_.end()) fail("route_policy: unknown intersection '" + xid + "'");
      const auto& x = net.intersections_[xs->second];
      for (const auto& [in_name, outs] : per_in) {
        const std::size_t in = link_id(in_name, "route_policy");
        if (std::find(x.in_links.begin(), x.in_links.end(), in) == x.in_links.end()) {
          fail("route_policy: link '" + in_name + "' is not an in_link of '" + xid + "'");
        }
        TurnTable table;
        double total = 0.0;
        for (const auto& [out_name, prob] : outs) {
          const std::size_t out = link_id(out_name, "route_policy");
          auto m = x.movement_index(in, out);
          if (!m) {
            fail("route_policy: movement " + in_name + "->" + out_name + " at '" + xid +
                 "' is served by zero phases");
          }
          if (!(prob >= 0.0)) fail("route_policy: negative probability");
          if (prob == 0.0) continue;
          table.movements.push_back(*m);
          table.probabilities.push_back(prob);
          total += prob;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
          std::ostringstream os;
          os << "route_policy: turn probabilities at '" << xid << "' from '" << in_name
             << "' sum to " << total << ", not 1";
          fail(os.str());
        }
        src.turns[xs->second].emplace(in, std::move(table));
      }
    }
    // Unlisted in-links turn uniformly over their movements.
    for (std::size_t s = 0; s < net.intersections_.size(); ++s) {
      const auto& x = net.intersections_[s];
      for (std::size_t in : x.in_links) {
        if (src.turns[s].count(in)) continue;
        TurnTable table;
        for (std::size_t m = 0; m < x.movements.size(); ++m) {
          if (x.movements[m].in_link == in) table.movements.push_back(m);
        }
        table.probabilities.assign(table.movements.size(), 1.0 / static_cast<double>(table.movements.size()));
        src.turns[s].emplace(in, std::move(table));
      }
    }
    net.sources_.push_back(std::move(src));
  }

  net.spec_ = std::move(spec);
  return net;
}

NeighborSets neighbor_sets(const ValidatedNetwork& net, std::size_t s, std::size_t phase) {
  if (s >= net.intersections().size()) throw ValidationError("unknown intersection index");
  const auto& x = net.intersection(s);
  if (phase >= x.num_phases()) throw ValidationError("unknown phase index");
  return {x.upstream[phase], x.downstream[phase]};
}

std::string to_string(EdgeClass c) { return c == EdgeClass::h ? "h" : "v"; }

EdgeClass edge_class_from_string(const std::string& s) {
  if (s == "h") return EdgeClass::h;
  if (s == "v") return EdgeClass::v;
  throw ValidationError("edge_class must be \"h\" or \"v\", got \"" + s + "\"");
}

}  // namespace sigsched
