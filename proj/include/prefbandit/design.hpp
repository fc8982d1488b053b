#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "prefbandit/dpo.hpp"
#include "prefbandit/instance.hpp"

namespace prefbandit {

struct VectorDesign {
  Eigen::VectorXd weights;     // over the input vector list, sums to 1
  double max_leverage = 0.0;   // replayed from the returned weights
  int arg_index = -1;          // vector attaining the max leverage
  int span_dim = 0;            // dimension the solver worked in
  bool certified = false;      // max_leverage <= span_dim * (1 + tol)
  int iterations = 0;
};

// G-optimal design by Frank-Wolfe with the closed-form step size, working in
// the span of the input vectors (rank-revealing SVD), initialized uniform on
// a pivoted-QR spanning subset. The certificate is recomputed from the final
// weights rather than trusted from solver state.
VectorDesign g_optimal_frank_wolfe(const std::vector<Eigen::VectorXd>& vectors, double tol,
                                   int max_iters);

// Max leverage psi_i^T M(mu)^+ psi_i recomputed from scratch for a weight
// vector; used for certificate replay.
double replay_leverage(const std::vector<Eigen::VectorXd>& vectors, const Eigen::VectorXd& weights,
                       int* arg_index = nullptr);

struct ConditionalDesign {
  Eigen::VectorXd weights;         // over responses
  double centered_leverage = 0.0;  // max_a ||phi(x,a) - phi(x,pi)||^2_{V(x,pi)^+}
  int centered_dim = 0;            // dim span{phi(x,a) - phi(x,a')}
  bool certified = false;
  Eigen::VectorXd mean_feature;    // phi(x, pi)
};

// Per-prompt design through the augmented map (1, phi(x,a)); the augmented
// leverage identity 1 + centered leverage pins the centered certificate at
// (augmented span dim) - 1.
ConditionalDesign conditional_centered_design(const Instance& inst, int x, double tol = 1e-3,
                                              int max_iters = 200000);

struct JointDesign {
  Eigen::MatrixXd weights;           // |X| x |A| joint distribution pi^g
  Eigen::MatrixXd centered_offsets;  // |X| x d, phi(x, pi^cg(x))
  Eigen::VectorXd x_marginal;        // mu^g_X
  double certificate = 0.0;          // sup_{x,a} ||phi^g||^2_{V(pi^g)^+}
  int arg_x = -1, arg_a = -1;
  int centered_dim = 0;              // global centered span dimension d'
  bool certified = false;            // certificate <= d'^2 (1 + tol)
  // Objective value of the x-marginal formulation evaluated at mu^g_X
  // (independent recomputation of the certificate path).
  double marginal_objective = 0.0;
};

// Preferential design: per-prompt centered designs, then a joint G-optimal
// design over the centered features; the returned joint distribution is the
// product of its x-marginal with the per-prompt conditionals.
JointDesign preferential_design(const Instance& inst, double tol = 1e-2, int max_iters = 200000);

void write_design_csv(std::ostream& os, const Instance& inst, const JointDesign& d);

struct TwoStepResult {
  Trajectory trajectory;  // rounds 0..2
  JointDesign design;
};

// Two rounds of preference fitting where each batch is drawn from the
// mixture (1-w) * [context x current policy] + w * [preferential design],
// both responses of a pair from the same component.
TwoStepResult run_two_step_dpo(const Instance& inst, long n, const DpoConfig& config, Rng& rng,
                               double design_weight = 0.5, uint64_t seed_tag = 0);

}  // namespace prefbandit
