#include "sigsched/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace sigsched {

double ClusterSequence::vehicle_count() const {
  double n = 0.0;
  for (const auto& c : clusters) n += c.count;
  return n;
}

ClusterSequence cluster_arrivals(std::vector<SensedArrival> arrivals, std::size_t phase, Seconds now,
                                 Seconds horizon, Seconds cluster_gap) {
  ClusterSequence seq;
  seq.phase = phase;
  std::erase_if(arrivals, [&](const SensedArrival& a) { return !(a.arrival < now + horizon); });
  std::sort(arrivals.begin(), arrivals.end(), [](const SensedArrival& a, const SensedArrival& b) {
    return a.arrival != b.arrival ? a.arrival < b.arrival : a.link < b.link;
  });

  std::size_t i = 0;
  while (i < arrivals.size()) {
    std::size_t j = i + 1;
    while (j < arrivals.size() && arrivals[j].arrival - arrivals[j - 1].arrival <= cluster_gap) ++j;
    std::map<std::size_t, std::pair<double, double>> per_link;  // link -> (count, rate)
    for (std::size_t k = i; k < j; ++k) {
      auto& e = per_link[arrivals[k].link];
      e.first += 1.0;
      e.second = arrivals[k].saturation_rate;
    }
    double service = 0.0;
    for (const auto& [_, e] : per_link) service = std::max(service, e.first / e.second);
    const Seconds arr = arrivals[i].arrival;
    seq.clusters.push_back({static_cast<double>(j - i), arr, arr + service});
    i = j;
  }
  return seq;
}

ClusterSequence build_cluster_sequence(const IntersectionSnapshot& snap, const Intersection& x, std::size_t phase,
                                       Seconds horizon, Seconds cluster_gap) {
  std::vector<SensedArrival> arrivals;
  for (const auto& a : snap.approaches) {
    for (std::size_t m : a.queued) {
      if (x.movements[m].phase == phase) arrivals.push_back({snap.now, a.link, a.saturation_rate});
    }
    for (const auto& v : a.moving) {
      if (x.movements[v.movement].phase == phase) arrivals.push_back({snap.now + v.eta, a.link, a.saturation_rate});
    }
  }
  return cluster_arrivals(std::move(arrivals), phase, snap.now, horizon, cluster_gap);
}

int estimate_queue(const IntersectionSnapshot& snap, const Intersection& x, std::size_t phase, double noise_std,
                   std::mt19937_64* rng) {
  int q = 0;
  for (const auto& a : snap.approaches) {
    for (std::size_t m : a.queued) q += x.movements[m].phase == phase ? 1 : 0;
  }
  if (noise_std > 0.0 && rng != nullptr) {
    std::normal_distribution<double> noise(0.0, noise_std);
    q = std::max(0, q + static_cast<int>(std::lround(noise(*rng))));
  }
  return q;
}

std::vector<int> link_queues(const IntersectionSnapshot& snap) {
  std::vector<int> q;
  q.reserve(snap.approaches.size());
  for (const auto& a : snap.approaches) q.push_back(static_cast<int>(a.queued.size()));
  return q;
}

TurnEstimate::TurnEstimate(const Intersection& x, double ema_alpha) : alpha_(ema_alpha) {
  const std::size_t M = x.movements.size();
  slot_of_movement_.resize(M);
  phase_of_movement_.resize(M);
  slot_movements_.resize(x.in_links.size());
  phase_movements_.resize(x.num_phases());
  for (std::size_t m = 0; m < M; ++m) {
    auto it = std::find(x.in_links.begin(), x.in_links.end(), x.movements[m].in_link);
    const auto slot = static_cast<std::size_t>(it - x.in_links.begin());
    slot_of_movement_[m] = slot;
    phase_of_movement_[m] = x.movements[m].phase;
    slot_movements_[slot].push_back(m);
    phase_movements_[x.movements[m].phase].push_back(m);
  }
  zeta_.assign(M, 0.0);
  for (const auto& ms : slot_movements_) {
    for (std::size_t m : ms) zeta_[m] = 1.0 / static_cast<double>(ms.size());
  }
  in_flow_.assign(x.in_links.size(), 0.0);
  seen_.assign(x.in_links.size(), false);
}

void TurnEstimate::update(std::span<const double> counts) {
  for (std::size_t slot = 0; slot < slot_movements_.size(); ++slot) {
    const auto& ms = slot_movements_[slot];
    double total = 0.0;
    for (std::size_t m : ms) total += counts[m];
    in_flow_[slot] = seen_[slot] ? (1.0 - alpha_) * in_flow_[slot] + alpha_ * total : total;
    if (total <= 0.0) continue;
    const double a = seen_[slot] ? alpha_ : 1.0;
    double norm = 0.0;
    for (std::size_t m : ms) {
      zeta_[m] = (1.0 - a) * zeta_[m] + a * (counts[m] / total);
      norm += zeta_[m];
    }
    for (std::size_t m : ms) zeta_[m] /= norm;
    seen_[slot] = true;
  }
}

double TurnEstimate::eta(std::size_t movement) const {
  // Outflow share within the phase: zeta weighted by the in-link's flow.
  // Before any flow is seen every in-link counts equally.
  const auto& ms = phase_movements_.at(phase_of_movement_.at(movement));
  bool any_flow = false;
  for (std::size_t m : ms) any_flow = any_flow || in_flow_[slot_of_movement_[m]] > 0.0;
  auto share = [&](std::size_t m) { return zeta_[m] * (any_flow ? in_flow_[slot_of_movement_[m]] : 1.0); };
  double total = 0.0;
  for (std::size_t m : ms) total += share(m);
  if (total <= 0.0) return 1.0 / static_cast<double>(ms.size());
  return share(movement) / total;
}

TurnEstimate update_turning_proportions(TurnEstimate est, std::span<const double> movement_counts) {
  est.update(movement_counts);
  return est;
}

}  // namespace sigsched
