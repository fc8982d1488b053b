#pragma once

#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "prefbandit/rng.hpp"

namespace prefbandit {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

double sigmoid(double z);
double softplus(double z);  // ln(1 + e^z), overflow-safe
double log_sum_exp(const Eigen::VectorXd& v);

// Finite contextual-bandit world: prompt set X, response set A, context
// distribution, feature table, base policy, KL temperature and the target
// parameter. Immutable after construction; safe to share across threads.
struct Instance {
  int num_prompts = 0;   // |X|
  int num_responses = 0; // |A|
  int dim = 0;           // feature dimension d

  Eigen::VectorXd context_dist; // |X|
  Eigen::MatrixXd base_policy;  // |X| x |A|, rows sum to 1
  Eigen::MatrixXd features;     // (|X|*|A|) x d, row (x*|A| + a) = phi(x,a)
  double gamma = 1.0;           // KL-regularization temperature
  double radius = 1.0;          // parameter-ball radius R
  double norm_order = 2.0;      // p in [1,2]
  Eigen::VectorXd true_param;   // theta*, d

  Eigen::VectorXd feature(int x, int a) const {
    return features.row(static_cast<Eigen::Index>(x) * num_responses + a);
  }

  // phi(x,a) = e_a for every prompt (requires dim == |A|).
  bool tabular() const;

  // Throws std::invalid_argument describing the first violated invariant:
  // feature norms <= 1, rows summing to 1 within 1e-12, nonnegative
  // probabilities, ||theta*||_p <= R.
  void validate() const;
};

// Lp norm for p in [1, 2] (p need not be integral).
double lp_norm(const Eigen::VectorXd& v, double p);

// For tabular instances the parameter is identifiable only up to shifts
// along the all-ones direction; canonicalize to mean zero before comparing.
// Non-tabular parameters are returned unchanged.
Eigen::VectorXd canonical_param(const Instance& inst, const Eigen::VectorXd& theta);

// ||canonical(theta - theta*)||_p.
double param_error(const Instance& inst, const Eigen::VectorXd& theta, double p);

// pi_theta(a|x) = pi0(a|x) exp(theta^T phi(x,a)) / Z_x(theta), computed in the
// log domain with log-sum-exp normalization over A at construction.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(const Instance& inst, Eigen::VectorXd theta);

  double prob(int x, int a) const;
  double log_prob(int x, int a) const;  // -inf where pi0 vanishes
  Eigen::VectorXd probs(int x) const;   // conditional row

  // log-partition A_x(theta) = ln E_{a~pi0}[exp(theta^T phi)]
  double log_partition(int x) const { return log_partition_[x]; }

  const Eigen::VectorXd& theta() const { return theta_; }
  const Instance& instance() const { return *inst_; }

  // Draw x ~ context distribution, then a ~ pi_theta(.|x).
  std::pair<int, int> sample(Rng& rng) const;
  int sample_response(int x, Rng& rng) const;

 private:
  const Instance* inst_;
  Eigen::VectorXd theta_;
  Eigen::MatrixXd log_probs_;  // |X| x |A|
  Eigen::MatrixXd probs_;      // |X| x |A|
  Eigen::VectorXd log_partition_;
};

struct Divergences {
  double kl = 0.0;          // KL(pi || pi')
  double reverse_kl = 0.0;  // KL(pi' || pi)
  double chi2 = 0.0;        // E_{x,a~pi'}[(pi/pi')^2] - 1
  double sup_density_ratio = 1.0;  // max_{x,a} pi(a|x)/pi'(a|x)
};

// Exact enumeration over X x A. Support violations are reported through the
// +infinity sentinel rather than an error.
Divergences divergences(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_prime);

}  // namespace prefbandit
