#pragma once

#include <functional>

#include <Eigen/Core>

namespace prefbandit {

// Euclidean projection onto {v : ||v - center||_p <= radius}. p = 2 rescales;
// p = 1 uses the exact sorted-threshold simplex procedure.
Eigen::VectorXd project_lp_ball(const Eigen::VectorXd& v, const Eigen::VectorXd& center,
                                double radius, double p);

struct LpConstraint {
  Eigen::VectorXd center;
  double radius = 0.0;
  double p = 2.0;
};

struct OptimizerConfig {
  int max_steps = 50000;
  // Convergence threshold on the projected-gradient norm is
  // grad_tol_per_sample * (number of samples) since objectives are sums.
  double grad_tol_per_sample = 1e-8;
};

struct FitResult {
  Eigen::VectorXd theta;
  double loss = 0.0;
  double grad_mapping_norm = 0.0;
  int steps = 0;
  bool converged = false;
};

using LossGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Projected gradient descent with a backtracking line search (accepted steps
// never increase the objective). Throws std::runtime_error on a non-finite
// objective value.
FitResult minimize_projected(const LossGradFn& f, const LpConstraint& constraint,
                             const OptimizerConfig& config, const Eigen::VectorXd& warm_start,
                             double scale_for_tol);

}  // namespace prefbandit
