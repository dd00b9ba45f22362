#include "sigsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>

#include "sigsched/error.hpp"

namespace sigsched {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr std::size_t kMaxStates = 4'000'000;
constexpr std::size_t kBruteForceLimit = 10;

void validate_input(const SchedulerInput& in) {
  const std::size_t P = in.sequences.size();
  if (P == 0) throw SchedulerError("scheduler needs at least one phase");
  if (in.weights.size() != P) throw SchedulerError("one weight per phase required");
  for (double w : in.weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw SchedulerError("phase weights must be finite and > 0");
  }
  if (in.current_phase >= P) throw SchedulerError("current_phase out of range");
  if (!(in.now >= 0.0)) throw SchedulerError("negative time 'now'");
  if (!(in.changeover_time >= 0.0)) throw SchedulerError("negative changeover time");
  if (!(in.max_green > 0.0)) throw SchedulerError("max_green must be > 0");
  if (!(in.min_green >= 0.0)) throw SchedulerError("negative min_green");
  if (!(in.green_elapsed >= 0.0)) throw SchedulerError("negative green_elapsed");
  if (in.ready_time && !(*in.ready_time >= in.now)) throw SchedulerError("ready_time before now");
  for (std::size_t p = 0; p < P; ++p) {
    if (in.sequences[p].phase != p) throw SchedulerError("sequence phase index mismatch");
    Seconds prev = 0.0;
    for (const auto& c : in.sequences[p].clusters) {
      if (!(c.arr >= 0.0) || !(c.dep >= c.arr) || !(c.count > 0.0)) {
        throw SchedulerError("invalid cluster (negative time, dep < arr or empty)");
      }
      if (c.arr < prev) throw SchedulerError("cluster sequence not ordered by arrival");
      prev = c.arr;
    }
  }
}

std::vector<double> normalized_weights(const std::vector<double>& w) {
  const double top = *std::max_element(w.begin(), w.end());
  std::vector<double> out(w.size());
  for (std::size_t p = 0; p < w.size(); ++p) out[p] = w[p] / top;
  return out;
}

// Single-machine state between cluster services.
struct Machine {
  std::size_t last = 0;
  Seconds free = 0.0;
  Seconds run_start = 0.0;
};

struct Service {
  Machine next;
  Seconds ast = 0.0;
  Seconds finish = 0.0;
};

/// Serves `c` on phase p from machine state m. Returns nullopt when the
/// extension would break max green while another phase is still waiting.
std::optional<Service> serve(const SchedulerInput& in, const Machine& m, std::size_t p, const Cluster& c,
                             bool others_waiting) {
  Service s;
  if (p == m.last) {
    s.ast = std::max(m.free, c.arr);
    s.finish = s.ast + c.duration();
    if (others_waiting && s.finish > m.run_start + in.max_green + kTimeEps) return std::nullopt;
    s.next = {p, s.finish, m.run_start};
  } else {
    const Seconds switch_at = std::max(m.free, m.run_start + in.min_green);
    s.ast = std::max(switch_at + in.changeover_time, c.arr);
    s.finish = s.ast + c.duration();
    s.next = {p, s.finish, s.ast};
  }
  return s;
}

Machine initial_machine(const SchedulerInput& in) {
  const Seconds ready = in.ready_time.value_or(in.now);
  return {in.current_phase, ready, ready - in.green_elapsed};
}

struct Label {
  double free = 0.0;
  double cost = 0.0;
  double run_start = 0.0;
  std::uint32_t parent_state = 0;
  std::uint32_t parent_label = 0;
  std::uint32_t phase = 0;
  bool root = false;
};

class DpSolver {
 public:
  DpSolver(const SchedulerInput& in, std::vector<double> w) : in_(in), w_(std::move(w)) {
    const std::size_t P = in.sequences.size();
    stride_.resize(P);
    std::size_t n = 1;
    for (std::size_t p = 0; p < P; ++p) {
      stride_[p] = n;
      const std::size_t len = in.sequences[p].clusters.size() + 1;
      if (n > kMaxStates / len) throw SchedulerError("scheduler instance too large");
      n *= len;
    }
    count_states_ = n;
    if (n * P > kMaxStates) throw SchedulerError("scheduler instance too large");
    labels_.resize(n * P);
    const bool finite_max = std::isfinite(in.max_green);
    const bool has_min = in.min_green > 0.0;
    if (finite_max && has_min) run_rule_ = RunRule::equal;
    else if (finite_max) run_rule_ = RunRule::later_better;
    else if (has_min) run_rule_ = RunRule::earlier_better;
    else run_rule_ = RunRule::ignore;
  }

  PhaseSchedule solve() {
    const std::size_t P = in_.sequences.size();
    const Machine m0 = initial_machine(in_);
    Label root;
    root.free = m0.free;
    root.run_start = m0.run_start;
    root.root = true;
    labels_[in_.current_phase].push_back(root);

    std::vector<std::size_t> k(P);
    for (std::size_t cs = 0; cs < count_states_; ++cs) {
      decode(cs, k);
      for (std::size_t last = 0; last < P; ++last) {
        const std::size_t sid = cs * P + last;
        for (std::size_t li = 0; li < labels_[sid].size(); ++li) {
          const Label lab = labels_[sid][li];
          for (std::size_t p = 0; p < P; ++p) {
            const auto& seq = in_.sequences[p].clusters;
            if (k[p] >= seq.size()) continue;
            bool others = false;
            for (std::size_t q = 0; q < P && !others; ++q) others = q != p && k[q] < in_.sequences[q].clusters.size();
            const Cluster& c = seq[k[p]];
            auto s = serve(in_, {last, lab.free, lab.run_start}, p, c, others);
            if (!s) continue;
            Label nl;
            nl.free = s->next.free;
            nl.run_start = s->next.run_start;
            nl.cost = lab.cost + c.count * (s->ast - c.arr) * w_[p];
            nl.parent_state = static_cast<std::uint32_t>(sid);
            nl.parent_label = static_cast<std::uint32_t>(li);
            nl.phase = static_cast<std::uint32_t>(p);
            insert((cs + stride_[p]) * P + p, nl);
          }
        }
      }
    }

    // Pick among complete states: cost, completion, then lexicographic phase order.
    const std::size_t full = count_states_ - 1;
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::size_t last = 0; last < P; ++last) {
      const std::size_t sid = full * P + last;
      for (std::size_t li = 0; li < labels_[sid].size(); ++li) {
        if (!best || better_final(sid, li, best->first, best->second)) best = {sid, li};
      }
    }
    if (!best) throw SchedulerError("no feasible schedule");
    return build(best->first, best->second);
  }

 private:
  enum class RunRule { ignore, later_better, earlier_better, equal };

  void decode(std::size_t cs, std::vector<std::size_t>& k) const {
    for (std::size_t p = 0; p < k.size(); ++p) {
      const std::size_t len = in_.sequences[p].clusters.size() + 1;
      k[p] = (cs / stride_[p]) % len;
    }
  }

  bool dominates(const Label& a, const Label& b) const {
    if (a.free > b.free || a.cost > b.cost) return false;
    switch (run_rule_) {
      case RunRule::ignore: return true;
      case RunRule::later_better: return a.run_start >= b.run_start;
      case RunRule::earlier_better: return a.run_start <= b.run_start;
      case RunRule::equal: return a.run_start == b.run_start;
    }
    return false;
  }

  void insert(std::size_t sid, const Label& nl) {
    auto& list = labels_[sid];
    for (const Label& e : list) {
      if (dominates(e, nl)) return;
    }
    // Targets always have a higher state id than the state being expanded,
    // so no child label points into this list yet.
    std::erase_if(list, [&](const Label& e) { return dominates(nl, e); });
    list.push_back(nl);
  }

  std::vector<std::uint32_t> phase_path(std::size_t sid, std::size_t li) const {
    std::vector<std::uint32_t> path;
    const Label* l = &labels_[sid][li];
    while (!l->root) {
      path.push_back(l->phase);
      l = &labels_[l->parent_state][l->parent_label];
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  bool better_final(std::size_t sa, std::size_t la, std::size_t sb, std::size_t lb) const {
    const Label& a = labels_[sa][la];
    const Label& b = labels_[sb][lb];
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.free != b.free) return a.free < b.free;
    return phase_path(sa, la) < phase_path(sb, lb);
  }

  PhaseSchedule build(std::size_t sid, std::size_t li) const {
    const auto path = phase_path(sid, li);
    PhaseSchedule out;
    out.hold_phase = in_.current_phase;
    Machine m = initial_machine(in_);
    std::vector<std::size_t> k(in_.sequences.size(), 0);
    for (std::uint32_t p : path) {
      const Cluster& c = in_.sequences[p].clusters[k[p]];
      bool others = false;
      for (std::size_t q = 0; q < k.size() && !others; ++q) others = q != p && k[q] < in_.sequences[q].clusters.size();
      auto s = serve(in_, m, p, c, others);
      out.entries.push_back({p, k[p], c, s->ast, s->finish});
      m = s->next;
      ++k[p];
    }
    return out;
  }

  const SchedulerInput& in_;
  std::vector<double> w_;
  std::vector<std::size_t> stride_;
  std::size_t count_states_ = 0;
  std::vector<std::vector<Label>> labels_;
  RunRule run_rule_ = RunRule::ignore;
};

/// Entry i starts a fresh run when its phase differs from the one before it.
std::vector<GreenInterval> green_runs(const SchedulerInput& in, const std::vector<ScheduleEntry>& entries) {
  std::vector<GreenInterval> runs;
  const Machine m0 = initial_machine(in);
  std::size_t last = in.current_phase;
  for (const auto& e : entries) {
    if (runs.empty() && e.phase == last) {
      runs.push_back({e.phase, m0.run_start, e.finish});
    } else if (!runs.empty() && e.phase == runs.back().phase) {
      runs.back().end = e.finish;
    } else {
      runs.push_back({e.phase, e.ast, e.finish});
    }
    last = e.phase;
  }
  return runs;
}

}  // namespace

PhaseSchedule schedule(const SchedulerInput& input) {
  validate_input(input);
  SchedulerInput work = input;

  std::size_t total_clusters = 0;
  for (const auto& s : input.sequences) total_clusters += s.clusters.size();
  if (total_clusters == 0) {
    PhaseSchedule empty;
    empty.hold_phase = input.current_phase;
    return empty;
  }
  const auto w = normalized_weights(input.weights);
  std::size_t split_limit = total_clusters + 16;
  if (std::isfinite(input.max_green)) {
    for (const auto& q : input.sequences) {
      for (const auto& c : q.clusters) split_limit += static_cast<std::size_t>(std::ceil(c.duration() / input.max_green));
    }
  }

  for (std::size_t splits = 0;; ++splits) {
    PhaseSchedule sched = DpSolver(work, w).solve();

    // First cluster in the schedule that alone outlasts max green, as long
    // as some other phase has work. Splitting never removes a schedule: the
    // two halves served back to back cost the same as the whole.
    std::optional<std::size_t> offending;
    if (std::isfinite(work.max_green)) {
      std::size_t busy = 0;
      for (const auto& q : work.sequences) busy += q.clusters.empty() ? 0 : 1;
      for (std::size_t i = 0; busy > 1 && i < sched.entries.size(); ++i) {
        if (sched.entries[i].cluster.duration() > work.max_green + kTimeEps) {
          offending = i;
          break;
        }
      }
    }
    if (!offending) {
      sched.splits = splits;
      sched.hold_phase = input.current_phase;
      sched.total_weighted_delay = cumulative_weighted_delay(sched, input.weights);
      sched.green = green_runs(work, sched.entries);
      return sched;
    }
    if (splits >= split_limit) {
      std::ostringstream os;
      os << "max-green splitting did not settle after " << splits << " splits";
      throw SchedulerError(os.str());
    }

    const ScheduleEntry& e = sched.entries[*offending];
    auto& seq = work.sequences[e.phase].clusters;
    const Cluster c = seq[e.index];
    const double frac = work.max_green / c.duration();
    const Cluster head{c.count * frac, c.arr, c.arr + work.max_green};
    const Cluster tail{c.count * (1.0 - frac), c.arr + work.max_green, c.dep};
    seq[e.index] = head;
    seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(e.index) + 1, tail);
  }
}

PhaseSchedule brute_force_schedule(const SchedulerInput& input) {
  validate_input(input);
  const std::size_t P = input.sequences.size();
  std::size_t total = 0;
  for (const auto& s : input.sequences) total += s.clusters.size();
  if (total > kBruteForceLimit) throw SchedulerError("brute force limited to 10 clusters");

  // Independent re-statement of the timing rules, walked per order.
  const Seconds ready = input.ready_time.value_or(input.now);
  struct Best {
    bool found = false;
    double cost = 0.0;
    Seconds completion = 0.0;
    std::vector<std::size_t> order;
  } best;

  std::vector<std::size_t> order;
  std::vector<std::size_t> taken(P, 0);
  std::function<void()> rec = [&]() {
    if (order.size() == total) {
      std::size_t phase = input.current_phase;
      Seconds free = ready;
      Seconds run_start = ready - input.green_elapsed;
      std::vector<std::size_t> next(P, 0);
      double cost = 0.0;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t p = order[i];
        const Cluster& c = input.sequences[p].clusters[next[p]++];
        Seconds ast;
        if (p == phase) {
          ast = std::max(free, c.arr);
          bool waiting = false;
          for (std::size_t j = i + 1; j < order.size(); ++j) waiting = waiting || order[j] != p;
          if (waiting && ast + (c.dep - c.arr) > run_start + input.max_green + kTimeEps) return;
        } else {
          Seconds leave = free;
          if (run_start + input.min_green > leave) leave = run_start + input.min_green;
          ast = std::max(leave + input.changeover_time, c.arr);
          run_start = ast;
          phase = p;
        }
        free = ast + (c.dep - c.arr);
        cost += c.count * (ast - c.arr) * input.weights[p];
      }
      const bool better = !best.found || cost < best.cost ||
                          (cost == best.cost && (free < best.completion ||
                                                 (free == best.completion && order < best.order)));
      if (better) best = {true, cost, free, order};
      return;
    }
    for (std::size_t p = 0; p < P; ++p) {
      if (taken[p] >= input.sequences[p].clusters.size()) continue;
      ++taken[p];
      order.push_back(p);
      rec();
      order.pop_back();
      --taken[p];
    }
  };
  rec();

  PhaseSchedule out;
  out.hold_phase = input.current_phase;
  if (total == 0) return out;
  if (!best.found) throw SchedulerError("no feasible order");
  std::size_t phase = input.current_phase;
  Seconds free = ready;
  Seconds run_start = ready - input.green_elapsed;
  std::vector<std::size_t> next(P, 0);
  for (std::size_t p : best.order) {
    const Cluster& c = input.sequences[p].clusters[next[p]];
    Seconds ast;
    if (p == phase) {
      ast = std::max(free, c.arr);
    } else {
      ast = std::max(std::max(free, run_start + input.min_green) + input.changeover_time, c.arr);
      run_start = ast;
      phase = p;
    }
    free = ast + (c.dep - c.arr);
    out.entries.push_back({p, next[p], c, ast, free});
    ++next[p];
  }
  out.total_weighted_delay = cumulative_weighted_delay(out, input.weights);
  out.green = green_runs(input, out.entries);
  return out;
}

double cumulative_weighted_delay(const PhaseSchedule& sched, std::span<const double> weights) {
  double total = 0.0;
  for (const auto& e : sched.entries) total += e.cluster.count * (e.ast - e.cluster.arr) * weights[e.phase];
  return total;
}

}  // namespace sigsched
