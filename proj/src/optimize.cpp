#include "prefbandit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace prefbandit {

namespace {

Eigen::VectorXd project_l1(const Eigen::VectorXd& diff, double radius) {
  if (diff.lpNorm<1>() <= radius) return diff;
  const int d = static_cast<int>(diff.size());
  std::vector<double> mags(d);
  for (int i = 0; i < d; ++i) mags[i] = std::abs(diff[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int j = 0; j < d; ++j) {
    cum += mags[j];
    const double t = (cum - radius) / (j + 1);
    if (mags[j] - t > 0.0) tau = t;
  }
  Eigen::VectorXd out(d);
  for (int i = 0; i < d; ++i) {
    const double m = std::abs(diff[i]) - tau;
    out[i] = m > 0.0 ? (diff[i] > 0 ? m : -m) : 0.0;
  }
  return out;
}

}  // namespace

Eigen::VectorXd project_lp_ball(const Eigen::VectorXd& v, const Eigen::VectorXd& center,
                                double radius, double p) {
  if (radius < 0.0) throw std::invalid_argument("project_lp_ball: negative radius");
  if (radius == 0.0) return center;
  const Eigen::VectorXd diff = v - center;
  if (p == 2.0) {
    const double n = diff.norm();
    if (n <= radius) return v;
    return center + diff * (radius / n);
  }
  if (p == 1.0) return center + project_l1(diff, radius);
  throw std::invalid_argument("project_lp_ball: only p = 1 and p = 2 are supported");
}

FitResult minimize_projected(const LossGradFn& f, const LpConstraint& constraint,
                             const OptimizerConfig& config, const Eigen::VectorXd& warm_start,
                             double scale_for_tol) {
  const double tol = config.grad_tol_per_sample * std::max(scale_for_tol, 1.0);

  FitResult res;
  res.theta = project_lp_ball(warm_start, constraint.center, constraint.radius, constraint.p);

  if (constraint.radius == 0.0) {
    Eigen::VectorXd g(res.theta.size());
    res.loss = f(res.theta, g);
    res.converged = true;
    return res;
  }

  Eigen::VectorXd grad(res.theta.size());
  double loss = f(res.theta, grad);
  if (!std::isfinite(loss)) throw std::runtime_error("optimizer: non-finite loss at start");

  double step = 1.0;
  for (int it = 0; it < config.max_steps; ++it) {
    // Backtrack until the quadratic upper-bound condition holds; this keeps
    // accepted iterates non-increasing in loss for convex objectives.
    Eigen::VectorXd cand;
    double cand_loss = 0.0;
    Eigen::VectorXd cand_grad(res.theta.size());
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      cand = project_lp_ball(res.theta - step * grad, constraint.center, constraint.radius,
                             constraint.p);
      const Eigen::VectorXd delta = cand - res.theta;
      cand_loss = f(cand, cand_grad);
      if (!std::isfinite(cand_loss)) {
        std::ostringstream os;
        os << "optimizer: non-finite loss at step " << it << " (step size " << step << ")";
        throw std::runtime_error(os.str());
      }
      const double bound = loss + grad.dot(delta) + delta.squaredNorm() / (2.0 * step);
      if (cand_loss <= bound + 1e-14 * std::abs(bound)) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (!accepted) {
      res.grad_mapping_norm = grad.norm();
      res.loss = loss;
      res.steps = it;
      res.converged = res.grad_mapping_norm <= tol;
      return res;
    }

    const double mapping_norm = (cand - res.theta).norm() / step;
    res.theta = cand;
    loss = std::min(loss, cand_loss);
    grad = cand_grad;
    res.steps = it + 1;
    if (mapping_norm <= tol) {
      res.loss = cand_loss;
      res.grad_mapping_norm = mapping_norm;
      res.converged = true;
      return res;
    }
    step = std::min(step * 1.3, 1e8);
  }

  res.loss = loss;
  res.grad_mapping_norm = grad.norm();
  res.converged = false;
  return res;
}

}  // namespace prefbandit
