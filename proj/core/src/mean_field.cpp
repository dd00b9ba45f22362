#include "sigsched/mean_field.hpp"

#include <algorithm>
#include <cmath>

#include "sigsched/error.hpp"

namespace sigsched {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double interaction_strength(double q_ts, double q_st, EdgeClass edge_class) {
  return edge_class == EdgeClass::h ? q_ts - q_st : q_st - q_ts;
}

std::vector<double> effective_queues(const DirectionalQueues& d) {
  std::vector<double> q_hat = d.local;
  for (const auto& t : d.terms) q_hat.at(t.phase) += (t.inflow - t.outflow) * t.mu;
  return q_hat;
}

double mf_update(double q_hat_h, double q_hat_v, double beta, double mu_prev, double damping) {
  const double raw = sigmoid(beta * (q_hat_h - q_hat_v));
  return std::clamp((1.0 - damping) * raw + damping * mu_prev, 0.0, 1.0);
}

std::vector<double> phase_weights_multi(std::span<const double> q_hat, double beta) {
  std::vector<double> w(q_hat.size());
  if (q_hat.empty()) return w;
  double top = beta * q_hat[0];
  for (double q : q_hat) top = std::max(top, beta * q);
  double total = 0.0;
  for (std::size_t p = 0; p < q_hat.size(); ++p) {
    w[p] = std::exp(beta * q_hat[p] - top);
    total += w[p];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> update_marginals(std::span<const double> q_hat, std::size_t h_phase, double beta,
                                     std::span<const double> mu_prev, double damping) {
  const std::size_t P = q_hat.size();
  std::vector<double> mu(P);
  if (P == 2) {
    const std::size_t v_phase = 1 - h_phase;
    mu[h_phase] = mf_update(q_hat[h_phase], q_hat[v_phase], beta, mu_prev[h_phase], damping);
    mu[v_phase] = 1.0 - mu[h_phase];
    return mu;
  }
  const auto raw = phase_weights_multi(q_hat, beta);
  double total = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    mu[p] = (1.0 - damping) * raw[p] + damping * mu_prev[p];
    total += mu[p];
  }
  for (double& x : mu) x /= total;
  return mu;
}

std::vector<double> effective_queues(const CouplingModel& model, std::size_t s,
                                     const std::vector<std::vector<double>>& mu) {
  const auto& node = model.nodes[s];
  std::vector<double> q_hat = node.local;
  for (const auto& t : node.terms) {
    const double m = t.neighbor == kNone ? t.mu : mu[t.neighbor][t.neighbor_phase];
    q_hat[t.phase] += (t.inflow - t.outflow) * m;
  }
  return q_hat;
}

double fixed_point_residual(const CouplingModel& model, const std::vector<std::vector<double>>& mu, double beta) {
  double r = 0.0;
  for (std::size_t s = 0; s < model.nodes.size(); ++s) {
    const auto q_hat = effective_queues(model, s, mu);
    const auto next = update_marginals(q_hat, model.h_phase[s], beta, mu[s], 0.0);
    for (std::size_t p = 0; p < next.size(); ++p) r = std::max(r, std::abs(next[p] - mu[s][p]));
  }
  return r;
}

FixedPointResult solve_fixed_point(const CouplingModel& model, double beta, double tol, std::size_t max_iter,
                                   double damping) {
  FixedPointResult res;
  res.mu.resize(model.nodes.size());
  for (std::size_t s = 0; s < model.nodes.size(); ++s) {
    const std::size_t P = model.nodes[s].local.size();
    res.mu[s].assign(P, 1.0 / static_cast<double>(P));
  }
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    std::vector<std::vector<double>> next(model.nodes.size());
    double delta = 0.0;
    for (std::size_t s = 0; s < model.nodes.size(); ++s) {
      const auto q_hat = effective_queues(model, s, res.mu);
      next[s] = update_marginals(q_hat, model.h_phase[s], beta, res.mu[s], damping);
      for (std::size_t p = 0; p < next[s].size(); ++p) delta = std::max(delta, std::abs(next[s][p] - res.mu[s][p]));
    }
    res.mu = std::move(next);
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, max_iter);
  res.residual = fixed_point_residual(model, res.mu, beta);
  return res;
}

double stability_bound(std::size_t queue_count, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("stability bound needs epsilon > 0");
  const double n = static_cast<double>(queue_count);
  return n * n / (2.0 * epsilon);
}

}  // namespace sigsched
