#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "prefbandit/coverage.hpp"
#include "prefbandit/distill.hpp"
#include "test_util.hpp"

using namespace prefbandit;
using pbtest::random_instance;
using pbtest::random_theta;
using pbtest::uniform_tabular;

TEST_SUITE_BEGIN("distill");

namespace {

PairDataset sample_pairs(const Instance& inst, const Eigen::VectorXd& sampler_theta, long n,
                         uint64_t seed) {
  const SoftmaxPolicy pi(inst, sampler_theta);
  PolicyPairSampler sampler(pi);
  Rng rng(seed);
  return collect_pairs(sampler, n, rng);
}

}  // namespace

TEST_CASE("exact reward models declare zero error") {
  Rng rng(3);
  const Instance inst = random_instance(2, 4, 3, rng);
  const RewardModel rm = RewardModel::exact(inst);
  CHECK(rm.epsilon_rm <= 1e-12);
}

TEST_CASE("corrupted reward models declare the injected error") {
  Rng gen(5);
  GeneratedInstance gi = easy_instance(5, gen);
  Rng crng(7);
  const RewardModel rm = RewardModel::corrupted(gi.instance, 0.05, crng);
  CHECK(rm.epsilon_rm == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("realizable parameters reach zero loss") {
  Rng rng(11);
  const Instance inst = random_instance(2, 4, 3, rng);
  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(3));
  const RewardModel rm = RewardModel::exact(inst);
  const PairDataset pairs = sample_pairs(inst, Eigen::VectorXd::Zero(3), 128, 13);
  for (DistillLoss kind : {DistillLoss::kSquared, DistillLoss::kBinaryKl}) {
    const auto [loss, grad] =
        rd_loss_grad(inst.true_param, base, rm.table, pairs, inst, {kind, 1.0});
    CHECK(loss <= 1e-18);
  }
}

TEST_CASE("squared loss at zero sums the squared reward gaps") {
  Rng rng(17);
  const Instance inst = random_instance(2, 4, 3, rng);
  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(3));
  const RewardModel rm = RewardModel::exact(inst);
  const PairDataset pairs = sample_pairs(inst, Eigen::VectorXd::Zero(3), 64, 19);
  const auto [loss, grad] = rd_loss_grad(Eigen::VectorXd::Zero(3), base, rm.table, pairs, inst,
                                         {DistillLoss::kSquared, 1.0});
  double expected = 0.0;
  for (const auto& row : pairs.rows) {
    const double dz = rm.table(row.x, row.a1) - rm.table(row.x, row.a2);
    expected += dz * dz;
  }
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences for both losses") {
  Rng rng(23);
  const Instance inst = random_instance(2, 4, 4, rng, /*gamma=*/0.7);
  const SoftmaxPolicy ref(inst, random_theta(4, 0.8, rng));
  const RewardModel rm = RewardModel::exact(inst);
  const PairDataset pairs = sample_pairs(inst, Eigen::VectorXd::Zero(4), 48, 29);
  for (DistillLossSpec spec :
       {DistillLossSpec{DistillLoss::kSquared, 1.0}, DistillLossSpec{DistillLoss::kBinaryKl, 1.0},
        DistillLossSpec{DistillLoss::kBinaryKl, 2.5}}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd theta = random_theta(4, 1.5, rng);
      const auto [loss, grad] = rd_loss_grad(theta, ref, rm.table, pairs, inst, spec);
      const double h = 1e-6;
      for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd hi = theta, lo = theta;
        hi[j] += h;
        lo[j] -= h;
        const double fd = (rd_loss_grad(hi, ref, rm.table, pairs, inst, spec).first -
                           rd_loss_grad(lo, ref, rm.table, pairs, inst, spec).first) /
                          (2 * h);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(2e-5));
      }
    }
  }
}

TEST_CASE("binary kl loss is nonnegative and vanishes only at the soft label") {
  Rng rng(31);
  const Instance inst = uniform_tabular(3);
  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(3));
  const RewardModel rm = RewardModel::exact(inst);
  PairDataset pairs;
  pairs.rows.push_back({0, 0, 1, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd theta = random_theta(3, 3.0, rng);
    const double beta = rng.uniform(0.5, 3.0);
    const auto [loss, grad] =
        rd_loss_grad(theta, base, rm.table, pairs, inst, {DistillLoss::kBinaryKl, beta});
    CHECK(loss >= -1e-15);
    const double y = inst.gamma * (theta[0] - theta[1]);
    const double z = rm.table(0, 0) - rm.table(0, 1);
    if (std::abs(y - beta * z) > 1e-3) CHECK(loss > 0.0);
  }
}

TEST_CASE("calibration identities") {
  Rng rng(37);
  const Instance inst = random_instance(2, 4, 3, rng, /*gamma=*/0.5);
  const RewardModel rm = RewardModel::exact(inst);
  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(3));

  // Current policy equal to the base leaves the table unchanged.
  CHECK((calibrated_reward(rm.table, base, inst, 0.7) - rm.table).cwiseAbs().maxCoeff() <= 1e-12);

  // Zero calibration level leaves any table unchanged.
  const SoftmaxPolicy current(inst, random_theta(3, 1.0, rng));
  CHECK((calibrated_reward(rm.table, current, inst, 0.0) - rm.table).cwiseAbs().maxCoeff() ==
        0.0);

  // Pairwise differences shift by gamma_c theta^T dphi.
  const double gamma_c = inst.gamma;
  const Eigen::MatrixXd cal = calibrated_reward(rm.table, current, inst, gamma_c);
  for (int x = 0; x < 2; ++x) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const double lhs = cal(x, a) - cal(x, b);
        const double rhs = rm.table(x, a) - rm.table(x, b) -
                           gamma_c * current.theta().dot(inst.feature(x, a) - inst.feature(x, b));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("one exact fixed-regularization round interpolates the target") {
  Rng gen(41);
  GeneratedInstance gi = easy_instance(4, gen);
  const Instance& inst = gi.instance;
  RdConfig config;
  config.base.batch_schedule = {512};
  Rng rng(43);
  const Trajectory traj = run_onpolicy_rd(inst, RewardModel::exact(inst),
                                          RdMode::kFixedRegularization, config, rng, 43);
  CHECK(traj.rounds.back().mad_err <= 1e-6);
}

TEST_CASE("calibration at the instance temperature matches fixed regularization") {
  // In the realizable setting the two updates coincide round by round.
  Rng gen(47);
  GeneratedInstance gi = easy_instance(4, gen);
  const Instance& inst = gi.instance;
  RdConfig config;
  config.base.batch_schedule = {256, 256, 256};
  config.gamma_c = inst.gamma;
  Rng r1(53), r2(53);
  const Trajectory fixed = run_onpolicy_rd(inst, RewardModel::exact(inst),
                                           RdMode::kFixedRegularization, config, r1, 53);
  const Trajectory calib = run_onpolicy_rd(inst, RewardModel::exact(inst),
                                           RdMode::kRewardCalibration, config, r2, 53);
  REQUIRE(fixed.rounds.size() == calib.rounds.size());
  for (size_t k = 0; k < fixed.rounds.size(); ++k) {
    const Eigen::VectorXd diff = canonical_param(inst, fixed.rounds[k].theta) -
                                 canonical_param(inst, calib.rounds[k].theta);
    CHECK(diff.norm() <= 1e-5);
  }
}

TEST_CASE("legacy anchoring drifts while calibration stays") {
  // Keeping the raw reward but anchoring at the current policy compounds the
  // tilt: the divergence grows with the round count. Calibration does not.
  Instance inst = uniform_tabular(4);
  inst.true_param << 0.45, 0.15, -0.15, -0.45;
  inst.gamma = 0.5;
  inst.radius = 40.0;
  inst.norm_order = 2.0;
  inst.validate();
  std::vector<double> legacy20, legacy3, calib20, calib3;
  for (int seed = 0; seed < 10; ++seed) {
    RdConfig config;
    config.base.batch_schedule.assign(20, 64);
    config.gamma_c = inst.gamma;
    Rng r1(100 + seed), r2(200 + seed);
    const Trajectory legacy =
        run_onpolicy_rd(inst, RewardModel::exact(inst), RdMode::kRebelLegacy, config, r1, seed);
    const Trajectory calib = run_onpolicy_rd(inst, RewardModel::exact(inst),
                                             RdMode::kRewardCalibration, config, r2, seed);
    legacy3.push_back(legacy.rounds[3].kl_fwd);
    legacy20.push_back(legacy.rounds[20].kl_fwd);
    calib3.push_back(calib.rounds[3].kl_fwd);
    calib20.push_back(calib.rounds[20].kl_fwd);
  }
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(med(legacy20) > med(legacy3));
  CHECK(med(calib20) <= med(calib3) + 1e-9);
}

TEST_CASE("closed-form iterates with a constant reward stay at the base") {
  const Instance inst = uniform_tabular(3);
  const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(1, 3, 0.7);
  const RebelSequence seq = rebel_exact_tabular(inst, constant, 0.5, 10);
  for (const auto& pol : seq.policies)
    for (int a = 0; a < 3; ++a) CHECK(pol(0, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("closed-form iterates collapse onto the best response") {
  Instance inst = uniform_tabular(4);
  Eigen::MatrixXd reward(1, 4);
  reward << 0.4, 0.1, -0.1, -0.4;
  const double gamma = 0.5;
  const double gap = 0.3;  // smallest reward gap
  const int k_star = static_cast<int>(std::ceil(gamma * 50.0 / gap));
  const RebelSequence seq = rebel_exact_tabular(inst, reward, gamma, k_star);
  CHECK(seq.entropies.back() < 0.1);
  int argmax = 0;
  seq.policies.back().row(0).maxCoeff(&argmax);
  CHECK(argmax == 0);
  // Entropy decreases monotonically toward the collapse.
  for (size_t k = 1; k < seq.entropies.size(); ++k)
    CHECK(seq.entropies[k] <= seq.entropies[k - 1] + 1e-12);
}

TEST_CASE("first closed-form iterate is the tilted base") {
  Rng rng(59);
  const Instance inst = uniform_tabular(3);
  Eigen::MatrixXd reward(1, 3);
  reward << 0.3, -0.1, 0.2;
  const double gamma = 0.7;
  const RebelSequence seq = rebel_exact_tabular(inst, reward, gamma, 1);
  Eigen::VectorXd expected(3);
  for (int a = 0; a < 3; ++a) expected[a] = std::exp(reward(0, a) / gamma) / 3.0;
  expected /= expected.sum();
  for (int a = 0; a < 3; ++a)
    CHECK(seq.policies[1](0, a) == doctest::Approx(expected[a]).epsilon(1e-12));
}

TEST_CASE("corrupted reward models floor the distillation error") {
  // The final deviation error settles in a constant bracket around the
  // declared model error across batch sizes.
  Rng gen(61);
  GeneratedInstance gi = easy_instance(4, gen);
  const Instance& inst = gi.instance;
  const double eps = 0.08;
  for (long n : {512L, 2048L, 8192L}) {
    std::vector<double> finals;
    for (int seed = 0; seed < 8; ++seed) {
      Rng crng = Rng(900 + seed).split(1);
      const RewardModel rm = RewardModel::corrupted(inst, eps, crng);
      RdConfig config;
      config.base.batch_schedule = {n};
      Rng rng(1000 + seed);
      const Trajectory traj =
          run_onpolicy_rd(inst, rm, RdMode::kFixedRegularization, config, rng, seed);
      finals.push_back(traj.rounds.back().mad_err);
    }
    std::sort(finals.begin(), finals.end());
    const double med = finals[finals.size() / 2];
    CHECK(med >= 0.5 * eps);
    CHECK(med <= 5.0 * eps);
  }
}

TEST_CASE("reward calibration requires a calibration level") {
  Rng gen(67);
  GeneratedInstance gi = easy_instance(3, gen);
  RdConfig config;
  config.base.batch_schedule = {64};
  config.gamma_c = -1.0;
  Rng rng(71);
  CHECK_THROWS_AS(run_onpolicy_rd(gi.instance, RewardModel::exact(gi.instance),
                                  RdMode::kRewardCalibration, config, rng),
                  std::invalid_argument);
}

TEST_CASE("binary kl loss is the soft-label cross entropy minus label entropy") {
  // For each pair, loss(y, z) + H(sigmoid(beta z)) must equal the soft-label
  // objective -P ln sigmoid(y) - (1-P) ln sigmoid(-y) with P = sigmoid(beta z).
  Rng rng(71);
  const Instance inst = uniform_tabular(3);
  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(3));
  PairDataset pairs;
  pairs.rows.push_back({0, 0, 1, 0});
  for (int trial = 0; trial < 300; ++trial) {
    const double beta = rng.uniform(0.3, 3.0);
    Eigen::MatrixXd reward(1, 3);
    reward << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    const Eigen::VectorXd theta = random_theta(3, 2.0, rng);
    const auto [loss, grad] =
        rd_loss_grad(theta, base, reward, pairs, inst, {DistillLoss::kBinaryKl, beta});

    const double y = inst.gamma * (theta[0] - theta[1]);
    const double z = reward(0, 0) - reward(0, 1);
    const double p = sigmoid(beta * z);
    const double cross_entropy =
        -p * std::log(sigmoid(y)) - (1.0 - p) * std::log(sigmoid(-y));
    const double label_entropy =
        -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
    CHECK(loss == doctest::Approx(cross_entropy - label_entropy).epsilon(1e-10));
  }
}

TEST_SUITE_END();
