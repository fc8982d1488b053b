#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "prefbandit/instance.hpp"

namespace prefbandit {

// Centered feature covariance V(pi) = E_{x,a~pi}[(phi - E_{a~pi(x)}phi)^{x2}],
// centering per prompt, by exact enumeration.
Eigen::MatrixXd feature_covariance(const SoftmaxPolicy& pi);

// Same for an arbitrary joint distribution over X x A (weights sum to 1);
// the x-marginal replaces the context distribution.
Eigen::MatrixXd joint_feature_covariance(const Instance& inst,
                                         const Eigen::MatrixXd& joint_weights);

// Smallest C with V_target <= C * V_base, i.e. the largest generalized
// eigenvalue restricted to range(V_base). Mass of V_target outside that range
// yields the +infinity sentinel. Rank deficiency is handled by eigenvalue
// truncation at 1e-10 relative to the top eigenvalue.
double pair_coverage_from(const Eigen::MatrixXd& v_base, const Eigen::MatrixXd& v_target);
double pair_coverage(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_target);

// Minimum eigenvalue of V(pi), restricted to the identifiable subspace
// {1}^perp for tabular features, the full space otherwise.
double lambda_min_on_identifiable(const Instance& inst, const Eigen::MatrixXd& v);
double lambda_min_on_identifiable(const SoftmaxPolicy& pi);

struct CoveragePoint {
  double r = 0.0;
  double c_hat = 1.0;             // certified lower bound on the local coverage
  Eigen::VectorXd arg_theta;      // the maximizer attaining c_hat
};

struct CoverageCurve {
  std::vector<CoveragePoint> points;  // strictly increasing radii
};

// Lower estimate of sup over theta in the Lp ball of radius r around theta*
// of pair_coverage(pi_theta, pi*): uniform ball sampling plus projected
// coordinate-ascent refinement from the best sample. The returned maximizer
// replays to the reported value, so the estimate is a certified lower bound.
CoveragePoint local_coverage_estimate(const Instance& inst, double r, double p, int budget,
                                      Rng& rng);

// Curve over a radius grid; the running maximum over nested balls keeps the
// curve nondecreasing without breaking the certificate.
CoverageCurve local_coverage_curve(const Instance& inst, const std::vector<double>& radii,
                                   double p, int budget, Rng& rng);

void write_coverage_csv(std::ostream& os, const CoverageCurve& curve);
CoverageCurve read_coverage_csv(std::istream& is);

// Uniform draw from the Lp ball of the given radius around a center
// (exponential-spacings simplex sampling with random signs for p=1,
// spherical direction with radial scaling for p=2, rejection from the
// enclosing L2 ball otherwise).
Eigen::VectorXd sample_lp_ball(const Eigen::VectorXd& center, double radius, double p, Rng& rng);

struct MinSoftmaxResult {
  double value = 0.0;
  Eigen::VectorXd arg_theta;
};

// Minimum over ||theta||_p <= R of min_i softmax(theta)_i for tabular
// features. p = 1 has the closed form 1/((d-1)e^R + 1); p > 1 reduces to a
// family with one negative coordinate and positive coordinates at two levels,
// searched numerically.
MinSoftmaxResult min_softmax_over_ball(int d, double R, double p);

// Mean absolute deviation of the linear probe u^T phi under a joint
// distribution, centered per prompt.
double mad_linear(const Instance& inst, const Eigen::MatrixXd& joint_weights,
                  const Eigen::VectorXd& u);
double mad_linear(const SoftmaxPolicy& pi, const Eigen::VectorXd& u);

// max over probes of MAD_{pi_target}(f_u) / MAD_{pi}(f_u); a 0/0 ratio is 1
// (such probes carry no signal), positive/0 is the +infinity sentinel.
double mad_pair_coverage(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_target,
                         const std::vector<Eigen::VectorXd>& probes);

struct RadiusRecursion {
  std::vector<double> radii;       // r_0 .. r_K (possibly truncated)
  bool side_condition_ok = true;   // all iterates obeyed r <= 1/(2 gamma) ^ R
  int truncated_at = -1;           // first violating step, -1 if none
};

// Theoretical radius predictor: r_{k+1}^2 = xi * C(r_k) with
// xi = 52 e^{4 gamma R} d^{2/p} ln(9 gamma R n / delta) / (lambda gamma^2 n),
// r_0 = R, interpolating the coverage curve linearly between grid points.
RadiusRecursion radius_recursion_predict(const CoverageCurve& curve, double n, double gamma,
                                         double R, int d, double p, double lambda, double delta,
                                         int K);

struct ConvexityReport {
  bool convex = true;
  double worst_violation = 0.0;  // max over interior points of sqrt(C) above its chord
  int worst_index = -1;
};

// Discrete midpoint-convexity check of r -> sqrt(C(r)) on the curve grid.
ConvexityReport sqrt_convexity_check(const CoverageCurve& curve);

}  // namespace prefbandit
