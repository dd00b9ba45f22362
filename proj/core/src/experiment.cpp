#include "sigsched/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "sigsched/error.hpp"
#include "sigsched/scenario.hpp"

namespace sigsched {

namespace {

using nlohmann::json;

constexpr double kEps = 1e-9;

// Shortest text that parses back to the same double.
std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

void fnv(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ull;
  }
}

struct LinearFit {
  double slope = 0.0;
  double stderr_ = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  LinearFit f;
  const std::size_t n = x.size();
  if (n < 3) return f;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  const double icept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (icept + f.slope * x[i]);
    ssr += r * r;
  }
  f.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return f;
}

json stats_json(const Stats& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

Stats stats_from(const json& j) {
  return {j.at("n").get<std::size_t>(), j.at("mean").get<double>(), j.at("std").get<double>(),
          j.at("min").get<double>(), j.at("max").get<double>()};
}

struct Outputs {
  std::ofstream vehicles, queues, weights, messages;
  bool on = false;
};

}  // namespace

Stats summarize(std::span<const double> xs) {
  Stats s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double total = 0.0;
  for (double x : xs) total += x;
  s.mean = total / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double f = pos - static_cast<double>(i);
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

double relative_improvement(double a, double b) { return a == 0.0 ? 0.0 : (a - b) / a; }

std::vector<TierRow> emit_demand_tier_breakdown(const RunReport& report, std::span<const DemandTier> tiers) {
  std::vector<TierRow> rows;
  if (tiers.empty()) {
    rows.push_back({"all", 0.0, report.duration, 0, 0.0});
  } else {
    for (const auto& t : tiers) rows.push_back({t.label, t.start, t.end, 0, 0.0});
  }
  std::vector<double> sums(rows.size(), 0.0);
  for (const auto& r : report.records) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (r.entry >= rows[k].start && r.entry < rows[k].end) {
        ++rows[k].vehicles;
        sums[k] += r.delay;
        break;
      }
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].vehicles > 0) rows[k].mean_delay = sums[k] / static_cast<double>(rows[k].vehicles);
  }
  return rows;
}

RunReport run_once(const ValidatedNetwork& net, ControllerMode mode, std::uint64_t seed, Seconds duration,
                   Seconds warmup, const std::filesystem::path& out_dir, bool keep_control_trace,
                   const std::string& scenario_name, Seconds drain_limit) {
  if (!(duration > warmup) || warmup < 0.0) throw ValidationError("need duration > warmup >= 0");
  const GlobalParams& gp = net.params();
  const std::size_t N = net.intersections().size();

  RunReport rep;
  rep.scenario = scenario_name;
  rep.mode = mode;
  rep.seed = seed;
  rep.duration = duration;
  rep.warmup = warmup;

  Outputs out;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    out.on = true;
    out.vehicles = open_out(out_dir / "vehicles.csv");
    out.queues = open_out(out_dir / "queues.csv");
    out.weights = open_out(out_dir / "weights.csv");
    out.messages = open_out(out_dir / "messages.csv");
    out.vehicles << "vehicle_id,source,entry,exit,free_flow,delay\n";
    out.queues << "time,intersection,phase,queue_len\n";
    out.weights << "time,intersection,phase,queue,q_hat,mu,weight\n";
    out.messages << "time,sender,receiver,kind,entries,total_value\n";
  }

  SimState state = make_initial_state(net, seed);
  GlobalParams agent_params = gp;
  agent_params.seed = seed;
  std::vector<Agent> agents;
  agents.reserve(N);
  for (std::size_t s = 0; s < N; ++s) agents.emplace_back(net, s, AgentConfig::from(agent_params, mode, s));
  MessageBus bus(static_cast<double>(gp.message_delay_steps) * gp.dt, gp.message_loss, seed);

  std::vector<std::size_t> controls(N, 0);
  std::vector<std::vector<double>> queue_samples(N), cluster_sizes(N), cluster_durations(N);
  std::uint64_t hash = 0xCBF29CE484222325ull;
  Seconds next_sample = 0.0;
  const auto steps = static_cast<std::int64_t>(std::llround(duration / gp.dt));
  const auto drain_steps = static_cast<std::int64_t>(std::llround((drain_limit < 0.0 ? duration : drain_limit) / gp.dt));

  for (std::int64_t k = 0; k < steps + drain_steps; ++k) {
    const bool draining = k >= steps;
    if (draining && state.counters.exited == state.counters.generated) break;
    const Seconds now = state.clock;

    auto inbound = bus.deliver(now);
    if (!inbound.empty()) {
      std::vector<std::vector<QueueMessage>> per(N);
      for (auto& m : inbound) {
        if (m.receiver < N) per[m.receiver].push_back(std::move(m));
      }
      for (std::size_t s = 0; s < N; ++s) {
        if (!per[s].empty()) agents[s].ingest(per[s]);
      }
    }

    for (std::size_t s = 0; s < N; ++s) {
      Agent& a = agents[s];
      a.observe_turns(now, state.discharged[s]);
      if (!a.due(now)) continue;
      const auto snap = snapshot(state, net, s);
      auto msgs = a.replan_cycle(snap);
      const ReplanTrace& tr = a.last_trace();
      if (tr.fail_safe) ++rep.fail_safes;
      if (now >= warmup && now < duration) {
        for (const auto& seq : tr.sequences) {
          for (const auto& c : seq.clusters) {
            cluster_sizes[s].push_back(c.count);
            cluster_durations[s].push_back(c.duration());
          }
        }
      }
      if (out.on && !tr.queues.empty()) {
        for (std::size_t p = 0; p < tr.queues.size(); ++p) {
          out.weights << num(now) << ',' << net.intersection(s).id << ',' << p << ',' << num(tr.queues[p]) << ','
                      << num(tr.q_hat[p]) << ',' << num(tr.mu[p]) << ',' << num(tr.weights[p]) << '\n';
        }
      }
      for (auto& m : msgs) {
        if (out.on) {
          double total = 0.0;
          for (const auto& e : m.payload) total += e.value;
          out.messages << num(now) << ',' << net.intersection(m.sender).id << ','
                       << net.intersection(m.receiver).id << ',' << to_string(m.kind) << ',' << m.payload.size()
                       << ',' << num(total) << '\n';
        }
        bus.post(std::move(m), now);
      }
    }

    const MetricsSample ms = measure(state, net, state.exited.size());
    for (std::size_t s = 0; s < N; ++s) {
      controls[s] = agents[s].decide(now, state.signals[s], ms.phase_queues[s]);
      fnv(hash, controls[s]);
      if (keep_control_trace) rep.control_trace.push_back(static_cast<std::uint16_t>(controls[s]));
    }

    if (!draining && now + kEps >= next_sample) {
      rep.stability.time.push_back(now);
      rep.stability.total_queue.push_back(ms.total_queue);
      for (std::size_t s = 0; s < N; ++s) {
        int total = 0;
        for (std::size_t p = 0; p < ms.phase_queues[s].size(); ++p) {
          total += ms.phase_queues[s][p];
          if (out.on) out.queues << num(now) << ',' << net.intersection(s).id << ',' << p << ',' << ms.phase_queues[s][p] << '\n';
        }
        if (now >= warmup) queue_samples[s].push_back(total);
      }
      next_sample += gp.queue_sample_period;
    }

    inject_vehicles(state, net, !draining);
    step(state, net, controls);  // throws InvariantViolation on a conservation or capacity breach
    ++rep.conservation_checks;
  }

  rep.control_hash = hash;
  rep.counters = state.counters;
  rep.in_network = state.on_links();
  rep.buffered = state.buffered();
  rep.messages_emitted = bus.emitted();
  rep.messages_delivered = bus.delivered();
  rep.messages_dropped = bus.dropped();
  for (const auto& a : agents) rep.messages_rejected += a.rejected_messages();

  for (const auto& r : state.exited) {
    if (r.entry >= warmup && r.entry < duration) rep.records.push_back(r);
  }
  for (const auto& v : state.vehicles) {
    if (!v.exited && v.entry_time >= warmup && v.entry_time < duration) ++rep.unfinished;
  }
  std::vector<double> delays;
  delays.reserve(rep.records.size());
  for (const auto& r : rep.records) delays.push_back(r.delay);
  rep.delay = summarize(delays);
  std::vector<double> sorted = delays;
  std::sort(sorted.begin(), sorted.end());
  rep.p90_delay = quantile_sorted(sorted, 0.9);
  for (int q = 0; q <= 100; ++q) rep.delay_cdf.push_back(quantile_sorted(sorted, q / 100.0));

  for (std::size_t s = 0; s < N; ++s) {
    rep.intersections.push_back({net.intersection(s).id, summarize(queue_samples[s]), summarize(cluster_sizes[s]),
                                 summarize(cluster_durations[s])});
  }
  rep.tiers = emit_demand_tier_breakdown(rep, gp.tiers);

  auto& st = rep.stability;
  st.queue_count = net.queue_count();
  st.epsilon = gp.stability_epsilon;
  st.bound = st.epsilon > 0.0 ? stability_bound(st.queue_count, st.epsilon) : 0.0;
  std::vector<double> after, tx, ty;
  for (std::size_t i = 0; i < st.time.size(); ++i) {
    if (st.time[i] >= warmup) after.push_back(st.total_queue[i]);
    if (st.time[i] >= duration * 2.0 / 3.0) {
      tx.push_back(st.time[i]);
      ty.push_back(st.total_queue[i]);
    }
  }
  st.time_average = summarize(after).mean;
  const auto fit = fit_line(tx, ty);
  st.tail_slope = fit.slope;
  st.tail_slope_stderr = fit.stderr_;

  if (out.on) {
    for (const auto& r : rep.records) {
      out.vehicles << r.id << ',' << r.source << ',' << num(r.entry) << ',' << num(r.exit) << ',' << num(r.free_flow)
                   << ',' << num(r.delay) << '\n';
    }
    auto summary = open_out(out_dir / "summary.json");
    summary << report_to_json(rep) << '\n';
  }
  return rep;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ValidationError("at least one seed is required");
  NetworkSpec spec = cfg.spec ? *cfg.spec : load_scenario(cfg.scenario);
  if (cfg.message_loss) spec.params.message_loss = *cfg.message_loss;
  const Seconds warmup = cfg.warmup.value_or(spec.params.warmup);
  if (!(cfg.duration > warmup) || warmup < 0.0) throw ValidationError("need duration > warmup >= 0");
  const auto net = std::make_shared<const ValidatedNetwork>(validate_network(spec));
  const std::string name = cfg.scenario.empty() ? "inline" : cfg.scenario.stem().string();

  std::vector<std::future<RunReport>> jobs;
  for (auto seed : cfg.seeds) {
    const auto dir = cfg.out_dir.empty() ? std::filesystem::path{} : cfg.out_dir / ("seed_" + std::to_string(seed));
    jobs.push_back(std::async(std::launch::async, [=, &cfg] {
      return run_once(*net, cfg.mode, seed, cfg.duration, warmup, dir, cfg.keep_control_trace, name, cfg.drain_limit);
    }));
  }
  std::vector<RunReport> reports;
  for (auto& j : jobs) reports.push_back(j.get());
  return reports;
}

// ---------------------------------------------------------------------------

std::string report_to_json(const RunReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["mode"] = to_string(r.mode);
  j["seed"] = r.seed;
  j["duration"] = r.duration;
  j["warmup"] = r.warmup;
  j["vehicles"] = r.records.size();
  j["unfinished"] = r.unfinished;
  j["delay"] = stats_json(r.delay);
  j["p90_delay"] = r.p90_delay;
  j["delay_cdf"] = r.delay_cdf;
  json xs = json::array();
  for (const auto& x : r.intersections) {
    xs.push_back({{"id", x.id},
                  {"queue", stats_json(x.queue)},
                  {"cluster_size", stats_json(x.cluster_size)},
                  {"cluster_duration", stats_json(x.cluster_duration)}});
  }
  j["intersections"] = xs;
  json tiers = json::array();
  for (const auto& t : r.tiers) {
    tiers.push_back({{"label", t.label}, {"start", t.start}, {"end", t.end}, {"vehicles", t.vehicles},
                     {"mean_delay", t.mean_delay}});
  }
  j["tiers"] = tiers;
  const auto& st = r.stability;
  j["stability"] = {{"queue_count", st.queue_count},   {"epsilon", st.epsilon},
                    {"bound", st.bound},               {"time_average", st.time_average},
                    {"tail_slope", st.tail_slope},     {"tail_slope_stderr", st.tail_slope_stderr}};
  const auto& c = r.counters;
  j["counters"] = {{"generated", c.generated},
                   {"admitted", c.admitted},
                   {"exited", c.exited},
                   {"in_network", r.in_network},
                   {"buffered", r.buffered},
                   {"blocked_discharges", c.blocked_discharges},
                   {"max_green_violations", c.max_green_violations},
                   {"phase_switches", c.phase_switches},
                   {"conservation_checks", r.conservation_checks},
                   {"fail_safes", r.fail_safes}};
  j["messages"] = {{"emitted", r.messages_emitted},
                   {"delivered", r.messages_delivered},
                   {"dropped", r.messages_dropped},
                   {"rejected", r.messages_rejected}};
  std::ostringstream h;
  h << std::hex << r.control_hash;
  j["control_hash"] = h.str();
  return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
  RunReport r;
  try {
    const json j = json::parse(text);
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = controller_mode_from_string(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.duration = j.at("duration").get<double>();
    r.warmup = j.at("warmup").get<double>();
    r.unfinished = j.at("unfinished").get<std::size_t>();
    r.delay = stats_from(j.at("delay"));
    r.p90_delay = j.at("p90_delay").get<double>();
    r.delay_cdf = j.at("delay_cdf").get<std::vector<double>>();
    for (const auto& x : j.at("intersections")) {
      r.intersections.push_back({x.at("id").get<std::string>(), stats_from(x.at("queue")),
                                 stats_from(x.at("cluster_size")), stats_from(x.at("cluster_duration"))});
    }
    for (const auto& t : j.at("tiers")) {
      r.tiers.push_back({t.at("label").get<std::string>(), t.at("start").get<double>(), t.at("end").get<double>(),
                         t.at("vehicles").get<std::size_t>(), t.at("mean_delay").get<double>()});
    }
    const auto& st = j.at("stability");
    r.stability.queue_count = st.at("queue_count").get<std::size_t>();
    r.stability.epsilon = st.at("epsilon").get<double>();
    r.stability.bound = st.at("bound").get<double>();
    r.stability.time_average = st.at("time_average").get<double>();
    r.stability.tail_slope = st.at("tail_slope").get<double>();
    r.stability.tail_slope_stderr = st.at("tail_slope_stderr").get<double>();
    const auto& c = j.at("counters");
    r.counters.generated = c.at("generated").get<std::uint64_t>();
    r.counters.admitted = c.at("admitted").get<std::uint64_t>();
    r.counters.exited = c.at("exited").get<std::uint64_t>();
    r.counters.blocked_discharges = c.at("blocked_discharges").get<std::uint64_t>();
    r.counters.max_green_violations = c.at("max_green_violations").get<std::uint64_t>();
    r.counters.phase_switches = c.at("phase_switches").get<std::uint64_t>();
    r.in_network = c.at("in_network").get<std::size_t>();
    r.buffered = c.at("buffered").get<std::size_t>();
    r.conservation_checks = c.at("conservation_checks").get<std::uint64_t>();
    r.fail_safes = c.at("fail_safes").get<std::uint64_t>();
    const auto& m = j.at("messages");
    r.messages_emitted = m.at("emitted").get<std::uint64_t>();
    r.messages_delivered = m.at("delivered").get<std::uint64_t>();
    r.messages_dropped = m.at("dropped").get<std::uint64_t>();
    r.messages_rejected = m.at("rejected").get<std::uint64_t>();
    r.control_hash = std::stoull(j.at("control_hash").get<std::string>(), nullptr, 16);
  } catch (const json::exception& e) {
    throw Error(std::string("bad summary: ") + e.what());
  }
  return r;
}

std::vector<RunReport> load_reports(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  static const std::regex seed_dir(R"(seed_(\d+))");
  std::map<std::uint64_t, std::filesystem::path> found;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (e.is_directory() && std::regex_match(name, m, seed_dir)) found[std::stoull(m[1].str())] = e.path();
  }
  if (found.empty()) throw Error("no seed_* results under " + dir.string());
  std::vector<RunReport> out;
  for (const auto& [seed, path] : found) {
    std::ifstream is(path / "summary.json");
    if (!is) throw Error("missing " + (path / "summary.json").string());
    std::stringstream ss;
    ss << is.rdbuf();
    out.push_back(report_from_json(ss.str()));
  }
  return out;
}

ComparisonSummary compare_reports(std::span<const RunReport> a, std::span<const RunReport> b) {
  auto by_seed = [](std::span<const RunReport> rs) {
    std::map<std::uint64_t, const RunReport*> m;
    for (const auto& r : rs) {
      if (!m.emplace(r.seed, &r).second) throw Error("duplicate seed " + std::to_string(r.seed));
    }
    return m;
  };
  const auto ma = by_seed(a);
  const auto mb = by_seed(b);
  if (ma.empty()) throw Error("nothing to compare");
  {
    std::vector<std::uint64_t> sa, sb;
    for (const auto& [s, r] : ma) sa.push_back(s);
    for (const auto& [s, r] : mb) sb.push_back(s);
    if (sa != sb) throw Error("reports cover different seed sets");
  }

  ComparisonSummary c;
  const double n = static_cast<double>(ma.size());
  const RunReport& first = *ma.begin()->second;
  c.cdf_a.assign(first.delay_cdf.size(), 0.0);
  c.cdf_b.assign(first.delay_cdf.size(), 0.0);
  for (const auto& [seed, ra] : ma) {
    const RunReport* rb = mb.at(seed);
    c.seeds.push_back({seed, ra->delay.mean, rb->delay.mean, relative_improvement(ra->delay.mean, rb->delay.mean)});
    if (!(rb->delay.mean < ra->delay.mean)) ++c.seeds_b_worse;
    c.mean_a += ra->delay.mean / n;
    c.mean_b += rb->delay.mean / n;
    c.p90_a += ra->p90_delay / n;
    c.p90_b += rb->p90_delay / n;
    for (std::size_t q = 0; q < c.cdf_a.size() && q < ra->delay_cdf.size() && q < rb->delay_cdf.size(); ++q) {
      c.cdf_a[q] += ra->delay_cdf[q] / n;
      c.cdf_b[q] += rb->delay_cdf[q] / n;
    }
  }
  c.improvement = relative_improvement(c.mean_a, c.mean_b);
  c.p90_improvement = relative_improvement(c.p90_a, c.p90_b);

  for (std::size_t i = 0; i < first.intersections.size(); ++i) {
    IntersectionComparison ic;
    ic.id = first.intersections[i].id;
    for (const auto& [seed, ra] : ma) {
      const RunReport* rb = mb.at(seed);
      if (i >= ra->intersections.size() || i >= rb->intersections.size()) throw Error("intersection lists differ");
      ic.queue_mean_a += ra->intersections[i].queue.mean / n;
      ic.queue_mean_b += rb->intersections[i].queue.mean / n;
      ic.cluster_std_a += ra->intersections[i].cluster_size.std / n;
      ic.cluster_std_b += rb->intersections[i].cluster_size.std / n;
    }
    ic.queue_improvement = relative_improvement(ic.queue_mean_a, ic.queue_mean_b);
    c.intersections.push_back(ic);
  }

  for (std::size_t t = 0; t < first.tiers.size(); ++t) {
    TierComparison tc;
    tc.label = first.tiers[t].label;
    for (const auto& [seed, ra] : ma) {
      const RunReport* rb = mb.at(seed);
      if (t >= ra->tiers.size() || t >= rb->tiers.size()) throw Error("tier lists differ");
      tc.mean_a += ra->tiers[t].mean_delay / n;
      tc.mean_b += rb->tiers[t].mean_delay / n;
    }
    tc.improvement = relative_improvement(tc.mean_a, tc.mean_b);
    c.tiers.push_back(tc);
  }
  return c;
}

std::string comparison_to_json(const ComparisonSummary& c) {
  json j;
  j["mean_delay_a"] = c.mean_a;
  j["mean_delay_b"] = c.mean_b;
  j["improvement"] = c.improvement;
  j["p90_delay_a"] = c.p90_a;
  j["p90_delay_b"] = c.p90_b;
  j["p90_improvement"] = c.p90_improvement;
  j["seeds_b_not_better"] = c.seeds_b_worse;
  json seeds = json::array();
  for (const auto& s : c.seeds) {
    seeds.push_back({{"seed", s.seed}, {"mean_a", s.mean_a}, {"mean_b", s.mean_b}, {"improvement", s.improvement}});
  }
  j["seeds"] = seeds;
  json xs = json::array();
  for (const auto& x : c.intersections) {
    xs.push_back({{"id", x.id},
                  {"queue_mean_a", x.queue_mean_a},
                  {"queue_mean_b", x.queue_mean_b},
                  {"queue_improvement", x.queue_improvement},
                  {"cluster_size_std_a", x.cluster_std_a},
                  {"cluster_size_std_b", x.cluster_std_b}});
  }
  j["intersections"] = xs;
  json tiers = json::array();
  for (const auto& t : c.tiers) {
    tiers.push_back({{"label", t.label}, {"mean_a", t.mean_a}, {"mean_b", t.mean_b}, {"improvement", t.improvement}});
  }
  j["tiers"] = tiers;
  j["cdf_a"] = c.cdf_a;
  j["cdf_b"] = c.cdf_b;
  return j.dump(2);
}

}  // namespace sigsched
