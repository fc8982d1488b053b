#include "prefbandit/instance.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prefbandit {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double log_sum_exp(const Eigen::VectorXd& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.size(); ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;  // all -inf
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double lp_norm(const Eigen::VectorXd& v, double p) {
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  if (p == 1.0) return v.lpNorm<1>();
  if (p == 2.0) return v.norm();
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  return std::pow(s, 1.0 / p);
}

bool Instance::tabular() const {
  if (dim != num_responses) return false;
  for (int x = 0; x < num_prompts; ++x) {
    for (int a = 0; a < num_responses; ++a) {
      const auto row = features.row(static_cast<Eigen::Index>(x) * num_responses + a);
      for (int j = 0; j < dim; ++j) {
        const double want = (j == a) ? 1.0 : 0.0;
        if (row[j] != want) return false;
      }
    }
  }
  return true;
}

void Instance::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("instance: " + msg); };
  if (num_prompts < 1) fail("need at least one prompt");
  if (num_responses < 2) fail("need at least two responses");
  if (dim < 1) fail("feature dimension must be positive");
  if (context_dist.size() != num_prompts) fail("context distribution size mismatch");
  if (base_policy.rows() != num_prompts || base_policy.cols() != num_responses)
    fail("base policy shape mismatch");
  if (features.rows() != static_cast<Eigen::Index>(num_prompts) * num_responses ||
      features.cols() != dim)
    fail("feature table shape mismatch");
  if (true_param.size() != dim) fail("true parameter dimension mismatch");
  if (!(gamma > 0.0)) fail("gamma must be positive");
  if (!(radius > 0.0)) fail("radius must be positive");
  if (norm_order < 1.0 || norm_order > 2.0) fail("norm order must lie in [1,2]");

  double csum = 0.0;
  for (int x = 0; x < num_prompts; ++x) {
    if (context_dist[x] < 0.0) fail("context distribution has a negative entry");
    csum += context_dist[x];
  }
  if (std::abs(csum - 1.0) > 1e-12) fail("context distribution does not sum to 1");

  for (int x = 0; x < num_prompts; ++x) {
    double rsum = 0.0;
    for (int a = 0; a < num_responses; ++a) {
      if (base_policy(x, a) < 0.0) fail("base policy has a negative entry");
      rsum += base_policy(x, a);
    }
    if (std::abs(rsum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "base policy row " << x << " does not sum to 1";
      fail(os.str());
    }
  }

  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    if (features.row(r).norm() > 1.0 + 1e-9) fail("a feature vector has euclidean norm > 1");
  }

  if (lp_norm(true_param, norm_order) > radius + 1e-9)
    fail("||theta*||_p exceeds the radius");
}

Eigen::VectorXd canonical_param(const Instance& inst, const Eigen::VectorXd& theta) {
  if (!inst.tabular()) return theta;
  return theta.array() - theta.mean();
}

double param_error(const Instance& inst, const Eigen::VectorXd& theta, double p) {
  const Eigen::VectorXd diff =
      canonical_param(inst, theta) - canonical_param(inst, inst.true_param);
  return lp_norm(diff, p);
}

SoftmaxPolicy::SoftmaxPolicy(const Instance& inst, Eigen::VectorXd theta)
    : inst_(&inst), theta_(std::move(theta)) {
  if (theta_.size() != inst.dim)
    throw std::invalid_argument("policy parameter dimension mismatch");
  const int X = inst.num_prompts;
  const int A = inst.num_responses;
  log_probs_.resize(X, A);
  probs_.resize(X, A);
  log_partition_.resize(X);
  Eigen::VectorXd logits(A);
  for (int x = 0; x < X; ++x) {
    for (int a = 0; a < A; ++a) {
      const double p0 = inst.base_policy(x, a);
      const double score = inst.feature(x, a).dot(theta_);
      logits[a] = (p0 > 0.0) ? std::log(p0) + score
                             : -std::numeric_limits<double>::infinity();
    }
    const double lz = log_sum_exp(logits);
    log_partition_[x] = lz;  // A_x(theta); equals 0 at theta = 0
    for (int a = 0; a < A; ++a) {
      log_probs_(x, a) = logits[a] - lz;
      probs_(x, a) = std::exp(log_probs_(x, a));
    }
  }
}

double SoftmaxPolicy::prob(int x, int a) const {
  if (x < 0 || x >= inst_->num_prompts || a < 0 || a >= inst_->num_responses)
    throw std::invalid_argument("policy_prob: index out of range");
  return probs_(x, a);
}

double SoftmaxPolicy::log_prob(int x, int a) const {
  if (x < 0 || x >= inst_->num_prompts || a < 0 || a >= inst_->num_responses)
    throw std::invalid_argument("log_prob: index out of range");
  return log_probs_(x, a);
}

Eigen::VectorXd SoftmaxPolicy::probs(int x) const { return probs_.row(x); }

std::pair<int, int> SoftmaxPolicy::sample(Rng& rng) const {
  const int x = rng.next_discrete(inst_->context_dist);
  const int a = rng.next_discrete(probs_.row(x));
  return {x, a};
}

int SoftmaxPolicy::sample_response(int x, Rng& rng) const {
  return rng.next_discrete(probs_.row(x));
}

Divergences divergences(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_prime) {
  const Instance& inst = pi.instance();
  if (&inst != &pi_prime.instance())
    throw std::invalid_argument("divergences: policies live on different instances");
  Divergences out;
  double kl = 0.0, rkl = 0.0, chi2 = 0.0, ratio = 0.0;
  for (int x = 0; x < inst.num_prompts; ++x) {
    const double dx = inst.context_dist[x];
    if (dx == 0.0) continue;
    for (int a = 0; a < inst.num_responses; ++a) {
      const double p = pi.prob(x, a);
      const double q = pi_prime.prob(x, a);
      if (p > 0.0) {
        if (q > 0.0) {
          const double lr = pi.log_prob(x, a) - pi_prime.log_prob(x, a);
          kl += dx * p * lr;
          chi2 += dx * p * p / q;
          ratio = std::max(ratio, p / q);
        } else {
          kl = kUnbounded;
          chi2 = kUnbounded;
          ratio = kUnbounded;
        }
      }
      if (q > 0.0) {
        if (p > 0.0) {
          rkl += dx * q * (pi_prime.log_prob(x, a) - pi.log_prob(x, a));
        } else {
          rkl = kUnbounded;
        }
      }
    }
  }
  out.kl = std::max(kl, 0.0);
  out.reverse_kl = std::max(rkl, 0.0);
  out.chi2 = std::isfinite(chi2) ? std::max(chi2 - 1.0, 0.0) : kUnbounded;
  out.sup_density_ratio = ratio;
  return out;
}

}  // namespace prefbandit
