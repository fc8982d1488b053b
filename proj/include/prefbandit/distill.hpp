#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefbandit/dpo.hpp"
#include "prefbandit/instance.hpp"
#include "prefbandit/oracle.hpp"

namespace prefbandit {

// Queryable reward table with its declared error, the mean absolute
// deviation of gamma^{-1} r~ - f* under the target policy.
struct RewardModel {
  Eigen::MatrixXd table;  // |X| x |A|
  double epsilon_rm = 0.0;

  static RewardModel exact(const Instance& inst);
  static RewardModel from_table(const Instance& inst, Eigen::MatrixXd table);
  // Exact rewards plus a linear corruption u^T phi scaled so that the
  // declared error equals eps (u drawn from the given generator).
  static RewardModel corrupted(const Instance& inst, double eps, Rng& rng);
};

enum class DistillLoss { kSquared, kBinaryKl };

struct DistillLossSpec {
  DistillLoss kind = DistillLoss::kSquared;
  double beta = 1.0;  // soft-label sharpness for the binary-KL loss
};

struct PairRow {
  int round = 0;
  int x = 0, a1 = 0, a2 = 0;
};

struct PairDataset {
  std::vector<PairRow> rows;
  bool empty() const { return rows.empty(); }
  size_t size() const { return rows.size(); }
};

PairDataset collect_pairs(const PairSampler& sampler, long n, Rng& rng, int round = 0);

// Reward-distillation objective: sum over pairs of
// loss(gamma * [log-ratio of pi_theta minus log-ratio of the reference],
//      reward difference). Squared loss is (y-z)^2; binary KL is
// KL(Bern(sigmoid(beta z)) || Bern(sigmoid(y))), which matches soft-label
// preference distillation up to the label-entropy constant.
std::pair<double, Eigen::VectorXd> rd_loss_grad(const Eigen::VectorXd& theta,
                                                const SoftmaxPolicy& reference,
                                                const Eigen::MatrixXd& reward,
                                                const PairDataset& data, const Instance& inst,
                                                const DistillLossSpec& loss);

// r^(x,a) = r~(x,a) - gamma_c * ln(pi_current(a|x) / pi0(a|x)).
Eigen::MatrixXd calibrated_reward(const Eigen::MatrixXd& reward, const SoftmaxPolicy& current,
                                  const Instance& inst, double gamma_c);

enum class RdMode { kFixedRegularization, kRewardCalibration, kRebelLegacy };

struct RdConfig {
  DpoConfig base;
  DistillLossSpec loss;
  double gamma_c = -1.0;  // required for reward calibration; -1 means unset
};

// Alg-style on-policy loop: per round sample unlabeled pairs from the current
// policy and fit per mode. Fixed regularization anchors every round at the
// base policy with the raw reward model; reward calibration anchors at the
// current policy with the implicit-reward-corrected table; the legacy mode
// anchors at the current policy with the raw table (kept as a negative
// control: its tilt compounds).
Trajectory run_onpolicy_rd(const Instance& inst, const RewardModel& rm, RdMode mode,
                           const RdConfig& config, Rng& rng, uint64_t seed_tag = 0);

struct RebelSequence {
  std::vector<Eigen::MatrixXd> policies;  // |X| x |A| conditional tables, k = 0..K
  std::vector<double> entropies;          // expected conditional entropy per step
};

// Closed-form iterates pi_k proportional to pi0 exp(k gamma^{-1} r~) on a
// tabular instance.
RebelSequence rebel_exact_tabular(const Instance& inst, const Eigen::MatrixXd& reward,
                                  double gamma, int K);

}  // namespace prefbandit
