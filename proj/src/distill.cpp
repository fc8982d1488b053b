#include "prefbandit/distill.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include "prefbandit/coverage.hpp"

namespace prefbandit {

RewardModel RewardModel::exact(const Instance& inst) {
  return from_table(inst, RewardFunction::true_reward(inst).table());
}

RewardModel RewardModel::from_table(const Instance& inst, Eigen::MatrixXd table) {
  if (table.rows() != inst.num_prompts || table.cols() != inst.num_responses)
    throw std::invalid_argument("reward model: table shape mismatch");
  RewardModel rm;
  rm.table = std::move(table);
  // Declared error: MAD under pi* of gamma^{-1} r~ - f*, computed exactly.
  const SoftmaxPolicy target(inst, inst.true_param);
  Eigen::MatrixXd joint(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x)
    joint.row(x) = inst.context_dist[x] * target.probs(x).transpose();
  double mad = 0.0;
  for (int x = 0; x < inst.num_prompts; ++x) {
    const double wx = joint.row(x).sum();
    if (wx <= 0.0) continue;
    double mean = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) {
      const double g = rm.table(x, a) / inst.gamma - inst.feature(x, a).dot(inst.true_param);
      mean += (joint(x, a) / wx) * g;
    }
    for (int a = 0; a < inst.num_responses; ++a) {
      const double g = rm.table(x, a) / inst.gamma - inst.feature(x, a).dot(inst.true_param);
      mad += joint(x, a) * std::abs(g - mean);
    }
  }
  rm.epsilon_rm = mad;
  return rm;
}

RewardModel RewardModel::corrupted(const Instance& inst, double eps, Rng& rng) {
  if (eps < 0.0) throw std::invalid_argument("reward model: negative corruption");
  Eigen::VectorXd u(inst.dim);
  for (int i = 0; i < inst.dim; ++i) u[i] = rng.next_gaussian();
  if (inst.tabular()) u.array() -= u.mean();  // keep the corruption identifiable
  const SoftmaxPolicy target(inst, inst.true_param);
  const double mad = mad_linear(target, u);
  if (mad <= 0.0) throw std::runtime_error("reward model: degenerate corruption direction");
  u *= eps / mad;
  Eigen::MatrixXd table = RewardFunction::true_reward(inst).table();
  for (int x = 0; x < inst.num_prompts; ++x)
    for (int a = 0; a < inst.num_responses; ++a)
      table(x, a) += inst.gamma * inst.feature(x, a).dot(u);
  return from_table(inst, std::move(table));
}

PairDataset collect_pairs(const PairSampler& sampler, long n, Rng& rng, int round) {
  if (n < 1) throw std::invalid_argument("collect_pairs: need at least one sample");
  PairDataset data;
  data.rows.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    const auto [x, a1, a2] = sampler.draw(rng);
    data.rows.push_back({round, x, a1, a2});
  }
  return data;
}

namespace {

struct CompressedRd {
  Eigen::MatrixXd dphi;    // m x d
  Eigen::VectorXd counts;  // m
  Eigen::VectorXd shift;   // m: [log-ratio of pi0] - [log-ratio of reference]
  Eigen::VectorXd target;  // m: reward differences
};

CompressedRd compress_rd(const PairDataset& data, const Instance& inst,
                         const SoftmaxPolicy& reference, const Eigen::MatrixXd& reward) {
  std::map<std::tuple<int, int, int>, long> counts;
  for (const auto& r : data.rows) ++counts[{r.x, r.a1, r.a2}];
  CompressedRd out;
  const auto m = static_cast<Eigen::Index>(counts.size());
  out.dphi.resize(m, inst.dim);
  out.counts.resize(m);
  out.shift.resize(m);
  out.target.resize(m);
  Eigen::Index i = 0;
  for (const auto& [key, c] : counts) {
    const auto& [x, a1, a2] = key;
    out.dphi.row(i) = (inst.feature(x, a1) - inst.feature(x, a2)).transpose();
    out.counts[i] = static_cast<double>(c);
    const double base_lr = (inst.base_policy(x, a1) > 0.0 && inst.base_policy(x, a2) > 0.0)
                               ? std::log(inst.base_policy(x, a1)) -
                                     std::log(inst.base_policy(x, a2))
                               : std::numeric_limits<double>::quiet_NaN();
    const double ref_lr = reference.log_prob(x, a1) - reference.log_prob(x, a2);
    if (!std::isfinite(base_lr) || !std::isfinite(ref_lr))
      throw std::invalid_argument("rd loss: zero-probability response in a sampled pair");
    out.shift[i] = base_lr - ref_lr;
    out.target[i] = reward(x, a1) - reward(x, a2);
    ++i;
  }
  return out;
}

std::pair<double, Eigen::VectorXd> rd_loss_grad_compressed(const CompressedRd& cp, double gamma,
                                                           const Eigen::VectorXd& theta,
                                                           const DistillLossSpec& spec) {
  // y = gamma (theta^T dphi + shift); targets z are the reward differences.
  const Eigen::VectorXd y = gamma * ((cp.dphi * theta) + cp.shift);
  double loss = 0.0;
  Eigen::VectorXd dy(y.size());
  if (spec.kind == DistillLoss::kSquared) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double diff = y[i] - cp.target[i];
      loss += cp.counts[i] * diff * diff;
      dy[i] = cp.counts[i] * 2.0 * diff;
    }
  } else {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double w = spec.beta * cp.target[i];
      const double p = sigmoid(w);
      // KL(Bern(p) || Bern(sigmoid(y))) via softplus differences.
      const double l =
          p * (softplus(-y[i]) - softplus(-w)) + (1.0 - p) * (softplus(y[i]) - softplus(w));
      loss += cp.counts[i] * l;
      dy[i] = cp.counts[i] * (sigmoid(y[i]) - p);
    }
  }
  Eigen::VectorXd grad = gamma * (cp.dphi.transpose() * dy);
  return {loss, std::move(grad)};
}

}  // namespace

std::pair<double, Eigen::VectorXd> rd_loss_grad(const Eigen::VectorXd& theta,
                                                const SoftmaxPolicy& reference,
                                                const Eigen::MatrixXd& reward,
                                                const PairDataset& data, const Instance& inst,
                                                const DistillLossSpec& loss) {
  if (data.empty()) throw std::invalid_argument("rd_loss_grad: empty dataset");
  if (loss.kind == DistillLoss::kBinaryKl && !(loss.beta > 0.0))
    throw std::invalid_argument("rd_loss_grad: beta must be positive");
  return rd_loss_grad_compressed(compress_rd(data, inst, reference, reward), inst.gamma, theta,
                                 loss);
}

Eigen::MatrixXd calibrated_reward(const Eigen::MatrixXd& reward, const SoftmaxPolicy& current,
                                  const Instance& inst, double gamma_c) {
  if (reward.rows() != inst.num_prompts || reward.cols() != inst.num_responses)
    throw std::invalid_argument("calibrated_reward: table shape mismatch");
  Eigen::MatrixXd out = reward;
  if (gamma_c == 0.0) return out;
  for (int x = 0; x < inst.num_prompts; ++x) {
    for (int a = 0; a < inst.num_responses; ++a) {
      const double p0 = inst.base_policy(x, a);
      const double pc = current.prob(x, a);
      if (p0 <= 0.0) {
        if (pc > 0.0)
          throw std::invalid_argument("calibrated_reward: current policy puts mass outside the "
                                      "base support");
        continue;  // both zero: the action is unreachable, leave the reward
      }
      out(x, a) -= gamma_c * (current.log_prob(x, a) - std::log(p0));
    }
  }
  return out;
}

Trajectory run_onpolicy_rd(const Instance& inst, const RewardModel& rm, RdMode mode,
                           const RdConfig& config, Rng& rng, uint64_t seed_tag) {
  if (config.base.batch_schedule.empty())
    throw std::invalid_argument("run_onpolicy_rd: empty batch schedule");
  if (mode == RdMode::kRewardCalibration && config.gamma_c < 0.0)
    throw std::invalid_argument("run_onpolicy_rd: reward calibration requires gamma_c");
  const ResolvedDpo r = resolve(inst, config.base);
  const LpConstraint ball{Eigen::VectorXd::Zero(inst.dim), r.radius, r.p};

  Trajectory traj;
  traj.method = mode == RdMode::kFixedRegularization ? "rd-fixed"
               : mode == RdMode::kRewardCalibration  ? "rd-calibrated"
                                                     : "rebel-legacy";
  traj.seed = seed_tag;

  const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(inst.dim));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(inst.dim);
  traj.rounds.push_back(diagnose(inst, theta, 0, 0));

  for (size_t k = 0; k < config.base.batch_schedule.size(); ++k) {
    const long n_k = config.base.batch_schedule[k];
    const auto t0 = std::chrono::steady_clock::now();
    const SoftmaxPolicy current(inst, theta);
    PolicyPairSampler sampler(current, traj.method);
    const PairDataset pairs = collect_pairs(sampler, n_k, rng, static_cast<int>(k));

    const SoftmaxPolicy& reference =
        (mode == RdMode::kFixedRegularization) ? base : current;
    Eigen::MatrixXd reward = rm.table;
    if (mode == RdMode::kRewardCalibration)
      reward = calibrated_reward(rm.table, current, inst, config.gamma_c);

    const CompressedRd cp = compress_rd(pairs, inst, reference, reward);
    LossGradFn fn = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      auto [loss, grad] = rd_loss_grad_compressed(cp, inst.gamma, t, config.loss);
      g = std::move(grad);
      return loss;
    };
    const FitResult fit = minimize_projected(fn, ball, config.base.opt, theta,
                                             static_cast<double>(pairs.size()));
    theta = fit.theta;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    traj.rounds.push_back(diagnose(inst, theta, static_cast<int>(k) + 1, n_k, secs));
  }
  return traj;
}

RebelSequence rebel_exact_tabular(const Instance& inst, const Eigen::MatrixXd& reward,
                                  double gamma, int K) {
  if (!(gamma > 0.0)) throw std::invalid_argument("rebel_exact_tabular: gamma must be positive");
  if (K < 0) throw std::invalid_argument("rebel_exact_tabular: K must be nonnegative");
  if (reward.rows() != inst.num_prompts || reward.cols() != inst.num_responses)
    throw std::invalid_argument("rebel_exact_tabular: table shape mismatch");

  RebelSequence seq;
  for (int k = 0; k <= K; ++k) {
    Eigen::MatrixXd pol(inst.num_prompts, inst.num_responses);
    double entropy = 0.0;
    for (int x = 0; x < inst.num_prompts; ++x) {
      Eigen::VectorXd logits(inst.num_responses);
      for (int a = 0; a < inst.num_responses; ++a) {
        const double p0 = inst.base_policy(x, a);
        logits[a] = (p0 > 0.0 ? std::log(p0) : -std::numeric_limits<double>::infinity()) +
                    k * reward(x, a) / gamma;
      }
      const double lz = log_sum_exp(logits);
      double h = 0.0;
      for (int a = 0; a < inst.num_responses; ++a) {
        const double lp = logits[a] - lz;
        const double p = std::exp(lp);
        pol(x, a) = p;
        if (p > 0.0) h -= p * lp;
      }
      entropy += inst.context_dist[x] * h;
    }
    seq.policies.push_back(std::move(pol));
    seq.entropies.push_back(entropy);
  }
  return seq;
}

}  // namespace prefbandit
