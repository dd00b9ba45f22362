#include "sigsched/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sigsched/error.hpp"

namespace sigsched {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError("scenario: " + what); }

const json& require(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) fail(ctx + " is missing '" + key + "'");
  return *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : j.items()) {
    if (!ok.count(k)) fail(ctx + " has unknown key '" + k + "'");
  }
}

RoutePolicy parse_policy(const json& j) {
  RoutePolicy policy;
  for (const auto& [xid, per_in] : j.items()) {
    for (const auto& [in, outs] : per_in.items()) {
      for (const auto& [out, p] : outs.items()) {
        policy[xid][in][out] = p.get<double>();
      }
    }
  }
  return policy;
}

json policy_json(const RoutePolicy& policy) {
  json j = json::object();
  for (const auto& [xid, per_in] : policy) {
    for (const auto& [in, outs] : per_in) {
      for (const auto& [out, p] : outs) j[xid][in][out] = p;
    }
  }
  return j;
}

GlobalParams parse_params(const json& j) {
  check_keys(j,
             {"dt", "horizon", "replan_period", "cluster_gap", "mf_beta", "mf_damping", "seed",
              "weight_floor", "ema_alpha", "turn_window", "staleness_periods",
              "message_delay_steps", "message_loss", "sensor_noise_std", "warmup",
              "queue_sample_period", "fixed_time_green", "stability_epsilon", "tiers"},
             "params");
  GlobalParams p;
  p.dt = get_or(j, "dt", p.dt);
  p.horizon = get_or(j, "horizon", p.horizon);
  p.replan_period = get_or(j, "replan_period", p.replan_period);
  p.cluster_gap = get_or(j, "cluster_gap", p.cluster_gap);
  p.mf_beta = get_or(j, "mf_beta", p.mf_beta);
  p.mf_damping = get_or(j, "mf_damping", p.mf_damping);
  p.seed = get_or(j, "seed", p.seed);
  p.weight_floor = get_or(j, "weight_floor", p.weight_floor);
  p.ema_alpha = get_or(j, "ema_alpha", p.ema_alpha);
  p.turn_window = get_or(j, "turn_window", p.turn_window);
  p.staleness_periods = get_or(j, "staleness_periods", p.staleness_periods);
  p.message_delay_steps = get_or(j, "message_delay_steps", p.message_delay_steps);
  p.message_loss = get_or(j, "message_loss", p.message_loss);
  p.sensor_noise_std = get_or(j, "sensor_noise_std", p.sensor_noise_std);
  p.warmup = get_or(j, "warmup", p.warmup);
  p.queue_sample_period = get_or(j, "queue_sample_period", p.queue_sample_period);
  p.fixed_time_green = get_or(j, "fixed_time_green", p.fixed_time_green);
  p.stability_epsilon = get_or(j, "stability_epsilon", p.stability_epsilon);
  if (auto it = j.find("tiers"); it != j.end()) {
    for (const auto& t : *it) {
      check_keys(t, {"label", "start", "end"}, "tier");
      p.tiers.push_back({require(t, "label", "tier").get<std::string>(),
                         require(t, "start", "tier").get<double>(),
                         require(t, "end", "tier").get<double>()});
    }
  }
  return p;
}

json params_json(const GlobalParams& p) {
  json j;
  j["dt"] = p.dt;
  j["horizon"] = p.horizon;
  j["replan_period"] = p.replan_period;
  j["cluster_gap"] = p.cluster_gap;
  j["mf_beta"] = p.mf_beta;
  j["mf_damping"] = p.mf_damping;
  j["seed"] = p.seed;
  j["weight_floor"] = p.weight_floor;
  j["ema_alpha"] = p.ema_alpha;
  j["turn_window"] = p.turn_window;
  j["staleness_periods"] = p.staleness_periods;
  j["message_delay_steps"] = p.message_delay_steps;
  j["message_loss"] = p.message_loss;
  j["sensor_noise_std"] = p.sensor_noise_std;
  j["warmup"] = p.warmup;
  j["queue_sample_period"] = p.queue_sample_period;
  j["fixed_time_green"] = p.fixed_time_green;
  j["stability_epsilon"] = p.stability_epsilon;
  j["tiers"] = json::array();
  for (const auto& t : p.tiers) j["tiers"].push_back({{"label", t.label}, {"start", t.start}, {"end", t.end}});
  return j;
}

}  // namespace

NetworkSpec parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  try {
    check_keys(root, {"boundaries", "intersections", "links", "demand", "route_policy", "params"},
               "document");
    NetworkSpec spec;
    spec.boundaries = get_or(root, "boundaries", std::vector<std::string>{});

    for (const auto& xj : require(root, "intersections", "document")) {
      check_keys(xj, {"id", "phases", "changeover_time", "max_green", "min_green"}, "intersection");
      IntersectionSpec x;
      x.id = require(xj, "id", "intersection").get<std::string>();
      x.changeover_time = get_or(xj, "changeover_time", x.changeover_time);
      x.max_green = get_or(xj, "max_green", x.max_green);
      x.min_green = get_or(xj, "min_green", x.min_green);
      for (const auto& pj : require(xj, "phases", "intersection '" + x.id + "'")) {
        check_keys(pj, {"id", "movements", "edge_class"}, "phase");
        PhaseSpec ph;
        ph.id = require(pj, "id", "phase").get<std::size_t>();
        if (auto ec = pj.find("edge_class"); ec != pj.end()) {
          ph.edge_class = edge_class_from_string(ec->get<std::string>());
        }
        for (const auto& mj : require(pj, "movements", "phase")) {
          ph.movements.push_back({require(mj, "in", "movement").get<std::string>(),
                                  require(mj, "out", "movement").get<std::string>()});
        }
        x.phases.push_back(std::move(ph));
      }
      spec.intersections.push_back(std::move(x));
    }

    for (const auto& lj : require(root, "links", "document")) {
      check_keys(lj, {"id", "from", "to", "length", "free_flow_speed", "saturation_rate", "capacity"},
                 "link");
      LinkSpec l;
      l.id = require(lj, "id", "link").get<std::string>();
      l.from = require(lj, "from", "link '" + l.id + "'").get<std::string>();
      l.to = require(lj, "to", "link '" + l.id + "'").get<std::string>();
      l.length = require(lj, "length", "link '" + l.id + "'").get<double>();
      l.free_flow_speed = require(lj, "free_flow_speed", "link '" + l.id + "'").get<double>();
      l.saturation_rate = require(lj, "saturation_rate", "link '" + l.id + "'").get<double>();
      l.capacity = require(lj, "capacity", "link '" + l.id + "'").get<int>();
      spec.links.push_back(std::move(l));
    }

    RoutePolicy shared;
    if (auto it = root.find("route_policy"); it != root.end()) shared = parse_policy(*it);

    if (auto it = root.find("demand"); it != root.end()) {
      for (const auto& dj : *it) {
        check_keys(dj, {"source", "schedule", "route_policy"}, "demand");
        DemandProfile d;
        d.source = require(dj, "source", "demand").get<std::string>();
        for (const auto& ij : require(dj, "schedule", "demand '" + d.source + "'")) {
          check_keys(ij, {"start", "end", "rate"}, "demand interval");
          d.schedule.push_back({require(ij, "start", "interval").get<double>(),
                                require(ij, "end", "interval").get<double>(),
                                require(ij, "rate", "interval").get<double>()});
        }
        d.route_policy = dj.contains("route_policy") ? parse_policy(dj["route_policy"]) : shared;
        spec.demand.push_back(std::move(d));
      }
    }

    spec.params = root.contains("params") ? parse_params(root["params"]) : GlobalParams{};
    return spec;
  } catch (const json::exception& e) {
    fail(std::string("type error: ") + e.what());
  }
}

NetworkSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario(os.str());
}

std::string dump_scenario(const NetworkSpec& spec, int indent) {
  json root;
  root["boundaries"] = spec.boundaries;
  root["intersections"] = json::array();
  for (const auto& x : spec.intersections) {
    json xj{{"id", x.id},
            {"changeover_time", x.changeover_time},
            {"max_green", x.max_green},
            {"min_green", x.min_green},
            {"phases", json::array()}};
    for (const auto& ph : x.phases) {
      json pj{{"id", ph.id}, {"movements", json::array()}};
      if (ph.edge_class) pj["edge_class"] = to_string(*ph.edge_class);
      for (const auto& m : ph.movements) pj["movements"].push_back({{"in", m.in_link}, {"out", m.out_link}});
      xj["phases"].push_back(std::move(pj));
    }
    root["intersections"].push_back(std::move(xj));
  }
  root["links"] = json::array();
  for (const auto& l : spec.links) {
    root["links"].push_back({{"id", l.id},
                             {"from", l.from},
                             {"to", l.to},
                             {"length", l.length},
                             {"free_flow_speed", l.free_flow_speed},
                             {"saturation_rate", l.saturation_rate},
                             {"capacity", l.capacity}});
  }

  // Hoist the route policy when every demand entry shares it.
  bool shared = !spec.demand.empty();
  for (const auto& d : spec.demand) shared = shared && d.route_policy == spec.demand.front().route_policy;
  if (shared) root["route_policy"] = policy_json(spec.demand.front().route_policy);

  root["demand"] = json::array();
  for (const auto& d : spec.demand) {
    json dj{{"source", d.source}, {"schedule", json::array()}};
    for (const auto& iv : d.schedule) {
      dj["schedule"].push_back({{"start", iv.start}, {"end", iv.end}, {"rate", iv.rate_vph}});
    }
    if (!shared) dj["route_policy"] = policy_json(d.route_policy);
    root["demand"].push_back(std::move(dj));
  }
  root["params"] = params_json(spec.params);
  return root.dump(indent);
}

void save_scenario(const NetworkSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file " + path.string());
  out << dump_scenario(spec) << '\n';
}

}  // namespace sigsched
