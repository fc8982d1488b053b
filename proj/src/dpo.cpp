#include "prefbandit/dpo.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "prefbandit/coverage.hpp"
#include "prefbandit/instance_io.hpp"

namespace prefbandit {

namespace {

struct CompressedPairs {
  Eigen::MatrixXd dphi;    // m x d, phi(x,a+) - phi(x,a-)
  Eigen::VectorXd counts;  // m
};

CompressedPairs compress(const PreferenceDataset& data, const Instance& inst) {
  std::map<std::tuple<int, int, int>, long> counts;
  for (const auto& r : data.rows) ++counts[{r.x, r.a_plus, r.a_minus}];
  CompressedPairs out;
  out.dphi.resize(static_cast<Eigen::Index>(counts.size()), inst.dim);
  out.counts.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index i = 0;
  for (const auto& [key, c] : counts) {
    const auto& [x, ap, am] = key;
    out.dphi.row(i) = (inst.feature(x, ap) - inst.feature(x, am)).transpose();
    out.counts[i] = static_cast<double>(c);
    ++i;
  }
  return out;
}

std::pair<double, Eigen::VectorXd> loss_grad_compressed(const CompressedPairs& cp, double gamma,
                                                        const Eigen::VectorXd& theta) {
  const Eigen::VectorXd z = gamma * (cp.dphi * theta);
  double loss = 0.0;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += cp.counts[i] * softplus(-z[i]);
    w[i] = -cp.counts[i] * sigmoid(-z[i]);  // d/dz of count * softplus(-z)
  }
  Eigen::VectorXd grad = gamma * (cp.dphi.transpose() * w);
  return {loss, std::move(grad)};
}

}  // namespace

std::pair<double, Eigen::VectorXd> dpo_loss_grad(const Eigen::VectorXd& theta,
                                                 const PreferenceDataset& data,
                                                 const Instance& inst) {
  if (data.empty()) throw std::invalid_argument("dpo_loss_grad: empty dataset");
  return loss_grad_compressed(compress(data, inst), inst.gamma, theta);
}

FitResult fit_dpo(const PreferenceDataset& data, const Instance& inst,
                  const LpConstraint& constraint, const OptimizerConfig& config,
                  const Eigen::VectorXd& warm_start) {
  if (data.empty()) throw std::invalid_argument("fit_dpo: empty dataset");
  const CompressedPairs cp = compress(data, inst);
  const double gamma = inst.gamma;
  LossGradFn fn = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    auto [loss, g] = loss_grad_compressed(cp, gamma, theta);
    grad = std::move(g);
    return loss;
  };
  return minimize_projected(fn, constraint, config, warm_start,
                            static_cast<double>(data.size()));
}

std::vector<long> make_batch_schedule(BatchScheduleKind kind, long n_i, long n_f, double eta,
                                      double alpha, int K) {
  if (K < 1) throw std::invalid_argument("batch schedule: K must be positive");
  if (n_i < 1) throw std::invalid_argument("batch schedule: n_i must be positive");
  if (kind == BatchScheduleKind::kConstant) return std::vector<long>(K, n_i);
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("batch schedule: eta must lie in (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("batch schedule: alpha must be positive");
  if (n_f < 1 || n_f > n_i)
    throw std::invalid_argument("batch schedule: need n_i >= n_f >= 1");
  std::vector<long> out(K);
  if (K == 1) {
    out[0] = n_i;
    return out;
  }
  for (int k = 0; k + 1 < K; ++k) {
    const double v = std::ceil(std::pow(eta, alpha * k) * static_cast<double>(n_i));
    out[k] = std::max(static_cast<long>(v), n_f);
  }
  out[K - 1] = n_f;
  return out;
}

ResolvedDpo resolve(const Instance& inst, const DpoConfig& config) {
  ResolvedDpo r;
  r.gamma = config.gamma > 0.0 ? config.gamma : inst.gamma;
  r.radius = config.radius > 0.0 ? config.radius : inst.radius;
  r.p = config.p > 0.0 ? config.p : inst.norm_order;
  if (r.p != 1.0 && r.p != 2.0)
    throw std::invalid_argument("dpo: constraint norm must be p = 1 or p = 2");
  return r;
}

RoundRecord diagnose(const Instance& inst, const Eigen::VectorXd& theta, int round, long batch,
                     double seconds) {
  RoundRecord rec;
  rec.round = round;
  rec.batch = batch;
  rec.theta = theta;
  rec.seconds = seconds;
  rec.err_p = param_error(inst, theta, inst.norm_order);
  rec.err_2 = param_error(inst, theta, 2.0);

  const SoftmaxPolicy pi(inst, theta);
  const SoftmaxPolicy target(inst, inst.true_param);
  const Divergences div = divergences(pi, target);
  rec.kl_fwd = div.kl;
  rec.kl_rev = div.reverse_kl;
  rec.coverage = pair_coverage(pi, target);

  const Eigen::VectorXd diff =
      canonical_param(inst, theta) - canonical_param(inst, inst.true_param);
  rec.mad_err = mad_linear(target, diff);
  const Eigen::MatrixXd vstar = feature_covariance(target);
  rec.err_vstar = std::sqrt(std::max(diff.dot(vstar * diff), 0.0));
  return rec;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "round,n_k,err_p,err_2,kl_fwd,kl_rev,coverage,seconds,seed\n";
  for (const auto& r : t.rounds) {
    os << r.round << ',' << r.batch << ',' << fmt_double(r.err_p) << ',' << fmt_double(r.err_2)
       << ',' << fmt_double(r.kl_fwd) << ',' << fmt_double(r.kl_rev) << ','
       << fmt_double(r.coverage) << ',' << fmt_double(r.seconds) << ',' << t.seed << '\n';
  }
}

Trajectory run_online_dpo(const Instance& inst, const DpoConfig& config, Rng& rng,
                          uint64_t seed_tag) {
  if (config.batch_schedule.empty())
    throw std::invalid_argument("run_online_dpo: empty batch schedule");
  const ResolvedDpo r = resolve(inst, config);
  const RewardFunction oracle = RewardFunction::true_reward(inst);
  const LpConstraint ball{Eigen::VectorXd::Zero(inst.dim), r.radius, r.p};

  Trajectory traj;
  traj.method = "online-dpo";
  traj.seed = seed_tag;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(inst.dim);
  traj.rounds.push_back(diagnose(inst, theta, 0, 0));

  PreferenceDataset pool;
  for (size_t k = 0; k < config.batch_schedule.size(); ++k) {
    const long n_k = config.batch_schedule[k];
    const auto t0 = std::chrono::steady_clock::now();
    const SoftmaxPolicy current(inst, theta);
    PolicyPairSampler sampler(current, "online-dpo");
    PreferenceDataset batch =
        collect_dataset(sampler, n_k, oracle, rng, static_cast<int>(k), seed_tag);
    const PreferenceDataset* fit_data = &batch;
    if (config.cumulative) {
      pool.rows.insert(pool.rows.end(), batch.rows.begin(), batch.rows.end());
      fit_data = &pool;
    }
    const FitResult fit = fit_dpo(*fit_data, inst, ball, config.opt, theta);
    theta = fit.theta;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    traj.rounds.push_back(diagnose(inst, theta, static_cast<int>(k) + 1, n_k, secs));
  }
  return traj;
}

Trajectory run_offline_dpo(const Instance& inst, const PreferenceDataset& data, int epochs,
                           const DpoConfig& config) {
  if (data.empty()) throw std::invalid_argument("run_offline_dpo: empty dataset");
  if (epochs < 1) throw std::invalid_argument("run_offline_dpo: epochs must be positive");
  const ResolvedDpo r = resolve(inst, config);
  const LpConstraint ball{Eigen::VectorXd::Zero(inst.dim), r.radius, r.p};

  Trajectory traj;
  traj.method = "offline-dpo";
  traj.seed = data.rows.empty() ? 0 : data.rows.front().seed;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(inst.dim);
  traj.rounds.push_back(diagnose(inst, theta, 0, 0));
  for (int e = 0; e < epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult fit = fit_dpo(data, inst, ball, config.opt, theta);
    theta = fit.theta;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    traj.rounds.push_back(
        diagnose(inst, theta, e + 1, static_cast<long>(data.size()), secs));
  }
  return traj;
}

}  // namespace prefbandit
