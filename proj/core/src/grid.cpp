#include "sigsched/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "sigsched/error.hpp"

namespace sigsched {

namespace {

// Travel directions; "E" means eastbound traffic.
enum Dir { kE = 0, kW = 1, kN = 2, kS = 3 };

std::string node(int r, int c) { return "I" + std::to_string(r) + std::to_string(c); }
std::string link_name(const std::string& from, const std::string& to) { return from + ">" + to; }

Dir left_of(Dir d) {
  switch (d) {
    case kE: return kN;
    case kN: return kW;
    case kW: return kS;
    case kS: return kE;
  }
  return kE;
}

Dir right_of(Dir d) {
  switch (d) {
    case kE: return kS;
    case kS: return kW;
    case kW: return kN;
    case kN: return kE;
  }
  return kE;
}

}  // namespace

std::vector<DemandInterval> pm_rush_ramp(double scale) {
  return {{0.0, 1800.0, 236.0 * scale}, {1800.0, 3600.0, 354.0 * scale}, {3600.0, 7200.0, 528.0 * scale}};
}

std::vector<DemandTier> pm_rush_tiers() {
  return {{"low", 0.0, 1800.0}, {"medium", 1800.0, 3600.0}, {"high", 3600.0, 7200.0}};
}

NetworkSpec make_grid(const GridOptions& opt) {
  if (opt.rows < 1 || opt.cols < 1) throw ValidationError("grid needs at least one row and column");
  NetworkSpec spec;
  spec.params = opt.params;
  const int R = opt.rows;
  const int C = opt.cols;

  const int cap = opt.capacity > 0 ? opt.capacity
                                   : std::max(1, static_cast<int>(opt.link_length / 7.5));
  const int bcap = opt.boundary_capacity > 0
                       ? opt.boundary_capacity
                       : std::max(1, static_cast<int>(opt.boundary_length / 7.5));

  // Name of the node adjacent to (r, c) in direction d; boundaries when off-grid.
  auto next_node = [&](int r, int c, Dir d) -> std::pair<std::string, bool> {
    switch (d) {
      case kE: return c + 1 < C ? std::pair{node(r, c + 1), true} : std::pair{"E" + std::to_string(r), false};
      case kW: return c > 0 ? std::pair{node(r, c - 1), true} : std::pair{"W" + std::to_string(r), false};
      case kN: return r > 0 ? std::pair{node(r - 1, c), true} : std::pair{"N" + std::to_string(c), false};
      case kS: return r + 1 < R ? std::pair{node(r + 1, c), true} : std::pair{"S" + std::to_string(c), false};
    }
    return {"", false};
  };
  // Node a vehicle travelling in direction d comes from when reaching (r, c).
  auto prev_node = [&](int r, int c, Dir d) {
    switch (d) {
      case kE: return next_node(r, c, kW);
      case kW: return next_node(r, c, kE);
      case kN: return next_node(r, c, kS);
      case kS: return next_node(r, c, kN);
    }
    return std::pair<std::string, bool>{"", false};
  };

  for (int r = 0; r < R; ++r) {
    spec.boundaries.push_back("W" + std::to_string(r));
    spec.boundaries.push_back("E" + std::to_string(r));
  }
  for (int c = 0; c < C; ++c) {
    spec.boundaries.push_back("N" + std::to_string(c));
    spec.boundaries.push_back("S" + std::to_string(c));
  }

  auto add_link = [&](const std::string& from, const std::string& to, bool boundary) {
    LinkSpec l;
    l.id = link_name(from, to);
    l.from = from;
    l.to = to;
    l.length = boundary ? opt.boundary_length : opt.link_length;
    l.free_flow_speed = opt.free_flow_speed;
    l.saturation_rate = opt.saturation_rate;
    l.capacity = boundary ? bcap : cap;
    spec.links.push_back(std::move(l));
  };

  // Every intersection gets an out-link in each direction; boundary entries
  // are added for the in-links that come from outside.
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      for (Dir d : {kE, kW, kN, kS}) {
        auto [to, internal] = next_node(r, c, d);
        add_link(node(r, c), to, !internal);
        auto [from, from_internal] = prev_node(r, c, d);
        if (!from_internal) add_link(from, node(r, c), true);
      }
    }
  }

  RoutePolicy policy;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      IntersectionSpec x;
      x.id = node(r, c);
      x.changeover_time = opt.changeover_time;
      x.max_green = opt.max_green;
      x.min_green = opt.min_green;
      const bool split = opt.three_phase.count({r, c}) > 0;
      x.phases.resize(split ? 3 : 2);
      for (std::size_t p = 0; p < x.phases.size(); ++p) x.phases[p].id = p;
      if (!split) {
        x.phases[0].edge_class = EdgeClass::h;
        x.phases[1].edge_class = EdgeClass::v;
      }
      for (Dir d : {kE, kW, kN, kS}) {
        const std::string in = link_name(prev_node(r, c, d).first, x.id);
        std::size_t phase = 0;
        if (d == kN || d == kS) phase = split ? (d == kN ? 1 : 2) : 1;
        std::array<std::pair<Dir, double>, 3> turns{
            std::pair{d, opt.turns ? 1.0 - opt.p_left - opt.p_right : 1.0},
            std::pair{left_of(d), opt.turns ? opt.p_left : 0.0},
            std::pair{right_of(d), opt.turns ? opt.p_right : 0.0}};
        for (const auto& [od, prob] : turns) {
          if (od != d && !opt.turns) continue;
          const std::string out = link_name(x.id, next_node(r, c, od).first);
          x.phases[phase].movements.push_back({in, out});
          policy[x.id][in][out] = prob;
        }
      }
      spec.intersections.push_back(std::move(x));
    }
  }

  auto add_source = [&](const std::string& from, const std::string& to, double mult) {
    DemandProfile d;
    d.source = link_name(from, to);
    for (auto iv : opt.ramp) {
      iv.rate_vph *= mult;
      d.schedule.push_back(iv);
    }
    d.route_policy = policy;
    spec.demand.push_back(std::move(d));
  };
  for (int r = 0; r < R; ++r) {
    add_source("W" + std::to_string(r), node(r, 0), opt.eastbound);
    add_source("E" + std::to_string(r), node(r, C - 1), opt.westbound);
  }
  for (int c = 0; c < C; ++c) {
    add_source("S" + std::to_string(c), node(R - 1, c), opt.northbound);
    add_source("N" + std::to_string(c), node(0, c), opt.southbound);
  }
  return spec;
}

}  // namespace sigsched
