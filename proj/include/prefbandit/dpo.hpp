#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefbandit/instance.hpp"
#include "prefbandit/optimize.hpp"
#include "prefbandit/oracle.hpp"

namespace prefbandit {

// Sum over the dataset of -ln sigmoid(gamma theta^T (phi+ - phi-)); the base
// policy's log-ratio cancels against the policy parametrization. Returns the
// loss and its exact gradient. Identical triples are merged with counts
// before evaluation.
std::pair<double, Eigen::VectorXd> dpo_loss_grad(const Eigen::VectorXd& theta,
                                                 const PreferenceDataset& data,
                                                 const Instance& inst);

// Constrained convex fit by projected gradient descent with backtracking.
FitResult fit_dpo(const PreferenceDataset& data, const Instance& inst,
                  const LpConstraint& constraint, const OptimizerConfig& config,
                  const Eigen::VectorXd& warm_start);

enum class BatchScheduleKind { kConstant, kExpDecay };

// Constant: K copies of n_i. Exponential decay: n_k = max(ceil(eta^{alpha k}
// n_i), n_f) with the final round forced to n_f (single-round schedules keep
// n_i).
std::vector<long> make_batch_schedule(BatchScheduleKind kind, long n_i, long n_f, double eta,
                                      double alpha, int K);

struct DpoConfig {
  double gamma = 0.0;            // 0 -> instance value
  double radius = 0.0;           // 0 -> instance value
  double p = 0.0;                // 0 -> instance value (must resolve to 1 or 2)
  std::vector<long> batch_schedule;
  OptimizerConfig opt;
  double delta = 0.05;           // carried only into the radius predictor
  bool cumulative = false;       // refit on all data collected so far (ablation)
};

struct RoundRecord {
  int round = 0;
  long batch = 0;
  Eigen::VectorXd theta;
  double err_p = 0.0;
  double err_2 = 0.0;
  double err_vstar = 0.0;  // ||theta - theta*||_{V(pi*)}
  double kl_fwd = 0.0;     // KL(pi_k || pi*)
  double kl_rev = 0.0;     // KL(pi* || pi_k)
  double coverage = 0.0;   // pair_coverage(pi_k, pi*)
  double mad_err = 0.0;    // MAD_{pi*}((theta - theta*)^T phi)
  double seconds = 0.0;
};

struct Trajectory {
  std::string method;
  uint64_t seed = 0;
  std::vector<RoundRecord> rounds;  // length K+1 including theta_0 = 0
};

void write_trajectory_csv(std::ostream& os, const Trajectory& t);

// Diagnostics for an arbitrary parameter against the instance target.
RoundRecord diagnose(const Instance& inst, const Eigen::VectorXd& theta, int round, long batch,
                     double seconds = 0.0);

// Iterative on-policy loop: sample a fresh batch from the current policy,
// label with the exact Bradley-Terry oracle, refit against the base-policy
// reference under the ||theta||_p <= R constraint (warm-started).
Trajectory run_online_dpo(const Instance& inst, const DpoConfig& config, Rng& rng,
                          uint64_t seed_tag = 0);

// Refit the same fixed dataset for `epochs` warm-started optimizer restarts;
// the data is never refreshed.
Trajectory run_offline_dpo(const Instance& inst, const PreferenceDataset& data, int epochs,
                           const DpoConfig& config);

// Resolved gamma/R/p for a config on an instance.
struct ResolvedDpo {
  double gamma = 0.0, radius = 0.0, p = 2.0;
};
ResolvedDpo resolve(const Instance& inst, const DpoConfig& config);

}  // namespace prefbandit
