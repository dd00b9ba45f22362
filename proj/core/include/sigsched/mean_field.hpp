#pragma once

#include <span>
#include <vector>

#include "sigsched/network.hpp"

namespace sigsched {

/// Logistic function 1 / (1 + exp(-x)), stable for large |x|.
double sigmoid(double x);

/// Pairwise coupling between s and neighbor t in the two-phase energy:
/// q_ts - q_st on h edges, q_st - q_ts on v edges.
double interaction_strength(double q_ts, double q_st, EdgeClass edge_class);

/// One neighbor contribution to the effective queue of `phase`:
/// (inflow - outflow) * mu. `neighbor`/`neighbor_phase` identify which
/// marginal `mu` is, so the same terms can be re-evaluated with other marginals.
struct NeighborTerm {
  std::size_t phase = 0;
  double inflow = 0.0;
  double outflow = 0.0;
  double mu = 0.0;
  std::size_t neighbor = kNone;
  std::size_t neighbor_phase = 0;
};

struct DirectionalQueues {
  std::vector<double> local;  // Q_{s,p}
  std::vector<NeighborTerm> terms;
};

/// Q^_{s,p} = Q_{s,p} + sum over terms of phase p of (inflow - outflow) * mu.
std::vector<double> effective_queues(const DirectionalQueues& d);

/// Two-phase mean-parameter update with damping:
/// (1 - damping) * S(beta (q_hat_h - q_hat_v)) + damping * mu_prev, clamped to [0, 1].
double mf_update(double q_hat_h, double q_hat_v, double beta, double mu_prev, double damping);

/// softmax(beta * q_hat) with max subtraction.
std::vector<double> phase_weights_multi(std::span<const double> q_hat, double beta);

/// Marginals over all P phases of an intersection. P == 2 goes through the
/// sigmoid update with `h_phase` as sigma = 1; otherwise the softmax, damped
/// componentwise (which keeps the sum at one).
std::vector<double> update_marginals(std::span<const double> q_hat, std::size_t h_phase, double beta,
                                     std::span<const double> mu_prev, double damping);

/// Per-intersection coupling for fixed-point solving: for every node, its
/// local queues and its neighbor terms (mu fields are ignored and replaced
/// by the current iterate).
struct CouplingModel {
  std::vector<DirectionalQueues> nodes;
  std::vector<std::size_t> h_phase;
};

/// Effective queues of node s with neighbor marginals taken from `mu`.
std::vector<double> effective_queues(const CouplingModel& model, std::size_t s,
                                     const std::vector<std::vector<double>>& mu);

struct FixedPointResult {
  std::vector<std::vector<double>> mu;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;  // max |mu - update(mu)| with damping 0
};

/// Synchronous (Jacobi) iteration of the marginal update over all nodes,
/// starting from uniform marginals, until max |delta mu| < tol or max_iter.
FixedPointResult solve_fixed_point(const CouplingModel& model, double beta, double tol, std::size_t max_iter,
                                   double damping = 0.0);

/// max over nodes and phases of |mu - update(mu)| (undamped).
double fixed_point_residual(const CouplingModel& model, const std::vector<std::vector<double>>& mu, double beta);

/// Upper bound n^2 / (2 epsilon) on the long-run expected total queue.
double stability_bound(std::size_t queue_count, double epsilon);

}  // namespace sigsched
