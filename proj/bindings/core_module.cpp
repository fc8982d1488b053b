#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "prefbandit/coverage.hpp"
#include "prefbandit/design.hpp"
#include "prefbandit/distill.hpp"
#include "prefbandit/dpo.hpp"
#include "prefbandit/generators.hpp"
#include "prefbandit/harness.hpp"
#include "prefbandit/instance_io.hpp"
#include "prefbandit/oracle.hpp"

namespace py = pybind11;
using namespace prefbandit;

namespace {

py::dict round_to_dict(const RoundRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["batch"] = r.batch;
  d["theta"] = r.theta;
  d["err_p"] = r.err_p;
  d["err_2"] = r.err_2;
  d["err_vstar"] = r.err_vstar;
  d["kl_fwd"] = r.kl_fwd;
  d["kl_rev"] = r.kl_rev;
  d["coverage"] = r.coverage;
  d["mad_err"] = r.mad_err;
  d["seconds"] = r.seconds;
  return d;
}

py::list trajectory_to_list(const Trajectory& t) {
  py::list out;
  for (const auto& r : t.rounds) out.append(round_to_dict(r));
  return out;
}

std::vector<long> to_schedule(const std::vector<long>& batches) {
  if (batches.empty()) throw std::invalid_argument("empty batch schedule");
  return batches;
}

RdMode parse_mode(const std::string& mode) {
  if (mode == "fixed") return RdMode::kFixedRegularization;
  if (mode == "calibrated") return RdMode::kRewardCalibration;
  if (mode == "legacy") return RdMode::kRebelLegacy;
  throw std::invalid_argument("mode must be fixed, calibrated or legacy");
}

DistillLossSpec parse_loss(const std::string& loss, double beta) {
  if (loss == "squared") return {DistillLoss::kSquared, beta};
  if (loss == "binary-kl") return {DistillLoss::kBinaryKl, beta};
  throw std::invalid_argument("loss must be squared or binary-kl");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Preference-learning experiments on finite contextual bandits";

  py::class_<Instance>(m, "Instance")
      .def_readonly("num_prompts", &Instance::num_prompts)
      .def_readonly("num_responses", &Instance::num_responses)
      .def_readonly("dim", &Instance::dim)
      .def_readonly("context_dist", &Instance::context_dist)
      .def_readonly("base_policy", &Instance::base_policy)
      .def_readonly("features", &Instance::features)
      .def_readonly("gamma", &Instance::gamma)
      .def_readonly("radius", &Instance::radius)
      .def_readonly("norm_order", &Instance::norm_order)
      .def_readonly("true_param", &Instance::true_param)
      .def("tabular", &Instance::tabular)
      .def("validate", &Instance::validate);

  m.def(
      "make_easy_instance",
      [](int d, uint64_t seed) {
        Rng rng(seed);
        return easy_instance(d, rng).instance;
      },
      py::arg("d"), py::arg("seed") = 1);
  m.def(
      "make_skewed_instance",
      [](int d, double R, long n, uint64_t seed) {
        Rng rng(seed);
        return skewed_base_instance_p1(d, R, n, rng).instance;
      },
      py::arg("d"), py::arg("R"), py::arg("n") = 8192, py::arg("seed") = 1);
  m.def(
      "make_two_coord_instance",
      [](int d, double R, double p, long n, uint64_t seed) {
        Rng rng(seed);
        return two_coord_instance(d, R, p, n, rng).instance;
      },
      py::arg("d"), py::arg("R"), py::arg("p"), py::arg("n") = 8192, py::arg("seed") = 1);
  m.def("load_instance", [](const std::string& path) { return load_instance_file(path); });
  m.def("save_instance",
        [](const std::string& path, const Instance& inst) { save_instance_file(path, inst); });

  m.def("policy_probs", [](const Instance& inst, const Eigen::VectorXd& theta) {
    const SoftmaxPolicy pi(inst, theta);
    Eigen::MatrixXd probs(inst.num_prompts, inst.num_responses);
    for (int x = 0; x < inst.num_prompts; ++x) probs.row(x) = pi.probs(x).transpose();
    return probs;
  });

  m.def("divergences",
        [](const Instance& inst, const Eigen::VectorXd& t1, const Eigen::VectorXd& t2) {
          const SoftmaxPolicy p1(inst, t1), p2(inst, t2);
          const Divergences d = divergences(p1, p2);
          py::dict out;
          out["kl"] = d.kl;
          out["reverse_kl"] = d.reverse_kl;
          out["chi2"] = d.chi2;
          out["sup_density_ratio"] = d.sup_density_ratio;
          return out;
        });

  m.def("feature_covariance", [](const Instance& inst, const Eigen::VectorXd& theta) {
    return feature_covariance(SoftmaxPolicy(inst, theta));
  });
  m.def("pair_coverage",
        [](const Instance& inst, const Eigen::VectorXd& theta, const Eigen::VectorXd& target) {
          return pair_coverage(SoftmaxPolicy(inst, theta), SoftmaxPolicy(inst, target));
        });
  m.def("lambda_min", [](const Instance& inst, const Eigen::VectorXd& theta) {
    return lambda_min_on_identifiable(SoftmaxPolicy(inst, theta));
  });
  m.def(
      "local_coverage_curve",
      [](const Instance& inst, const std::vector<double>& radii, double p, int budget,
         uint64_t seed) {
        Rng rng(seed);
        const CoverageCurve curve = local_coverage_curve(inst, radii, p, budget, rng);
        py::list out;
        for (const auto& pt : curve.points) {
          py::dict d;
          d["r"] = pt.r;
          d["c_hat"] = pt.c_hat;
          d["arg_theta"] = pt.arg_theta;
          out.append(d);
        }
        return out;
      },
      py::arg("instance"), py::arg("radii"), py::arg("p") = 2.0, py::arg("budget") = 128,
      py::arg("seed") = 1);
  m.def("min_softmax_over_ball", [](int d, double R, double p) {
    const MinSoftmaxResult res = min_softmax_over_ball(d, R, p);
    return py::make_tuple(res.value, res.arg_theta);
  });
  m.def("param_error", [](const Instance& inst, const Eigen::VectorXd& theta, double p) {
    return param_error(inst, theta, p);
  });

  m.def(
      "g_optimal_design",
      [](const Eigen::MatrixXd& vectors, double tol, int max_iters) {
        std::vector<Eigen::VectorXd> vecs;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i)
          vecs.push_back(vectors.row(i).transpose());
        const VectorDesign design = g_optimal_frank_wolfe(vecs, tol, max_iters);
        py::dict out;
        out["weights"] = design.weights;
        out["max_leverage"] = design.max_leverage;
        out["span_dim"] = design.span_dim;
        out["certified"] = design.certified;
        out["iterations"] = design.iterations;
        return out;
      },
      py::arg("vectors"), py::arg("tol") = 1e-2, py::arg("max_iters") = 100000);
  m.def(
      "preferential_design",
      [](const Instance& inst, double tol) {
        const JointDesign jd = preferential_design(inst, tol);
        py::dict out;
        out["weights"] = jd.weights;
        out["x_marginal"] = jd.x_marginal;
        out["certificate"] = jd.certificate;
        out["centered_dim"] = jd.centered_dim;
        out["certified"] = jd.certified;
        return out;
      },
      py::arg("instance"), py::arg("tol") = 1e-2);

  m.def("project_lp_ball", &project_lp_ball);

  m.def(
      "run_online_dpo",
      [](const Instance& inst, const std::vector<long>& batches, uint64_t seed,
         bool cumulative) {
        DpoConfig config;
        config.batch_schedule = to_schedule(batches);
        config.cumulative = cumulative;
        Rng rng(seed);
        return trajectory_to_list(run_online_dpo(inst, config, rng, seed));
      },
      py::arg("instance"), py::arg("batches"), py::arg("seed"), py::arg("cumulative") = false);

  m.def(
      "run_offline_dpo",
      [](const Instance& inst, long n, int epochs, uint64_t seed) {
        const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(inst.dim));
        PolicyPairSampler sampler(base, "offline-dpo");
        const RewardFunction oracle = RewardFunction::true_reward(inst);
        Rng rng(seed);
        const PreferenceDataset data = collect_dataset(sampler, n, oracle, rng, 0, seed);
        DpoConfig config;
        return trajectory_to_list(run_offline_dpo(inst, data, epochs, config));
      },
      py::arg("instance"), py::arg("n"), py::arg("epochs") = 1, py::arg("seed") = 1);

  m.def(
      "run_two_step",
      [](const Instance& inst, long n, uint64_t seed, double design_weight) {
        DpoConfig config;
        Rng rng(seed);
        return trajectory_to_list(
            run_two_step_dpo(inst, n, config, rng, design_weight, seed).trajectory);
      },
      py::arg("instance"), py::arg("n"), py::arg("seed"), py::arg("design_weight") = 0.5);

  m.def(
      "run_reward_distillation",
      [](const Instance& inst, const std::string& mode, const std::vector<long>& batches,
         uint64_t seed, const std::string& loss, double beta, double gamma_c,
         double rm_epsilon) {
        RdConfig config;
        config.base.batch_schedule = to_schedule(batches);
        config.loss = parse_loss(loss, beta);
        config.gamma_c = gamma_c >= 0.0 ? gamma_c : inst.gamma;
        Rng corruption = Rng(seed).split(0x524d);
        const RewardModel rm = rm_epsilon > 0.0
                                   ? RewardModel::corrupted(inst, rm_epsilon, corruption)
                                   : RewardModel::exact(inst);
        Rng rng(seed);
        return trajectory_to_list(
            run_onpolicy_rd(inst, rm, parse_mode(mode), config, rng, seed));
      },
      py::arg("instance"), py::arg("mode"), py::arg("batches"), py::arg("seed"),
      py::arg("loss") = "squared", py::arg("beta") = 1.0, py::arg("gamma_c") = -1.0,
      py::arg("rm_epsilon") = 0.0);

  m.def(
      "rebel_exact_entropies",
      [](const Instance& inst, int K) {
        const Eigen::MatrixXd reward = RewardFunction::true_reward(inst).table();
        return rebel_exact_tabular(inst, reward, inst.gamma, K).entropies;
      },
      py::arg("instance"), py::arg("K"));

  m.def("fit_loglog_slope", [](const std::vector<double>& xs, const std::vector<double>& ys) {
    const SlopeFit fit = fit_loglog_slope(xs, ys);
    return py::make_tuple(fit.slope, fit.intercept, fit.residual);
  });

  m.def(
      "run_experiment",
      [](const std::string& config_text, int parallelism) {
        const ExperimentSpec spec = parse_config(config_text);
        const auto records = run_experiment(spec, parallelism);
        py::list out;
        for (const auto& r : records) {
          py::dict d;
          d["method"] = r.method;
          d["sweep"] = r.sweep;
          d["seed"] = r.seed;
          d["round"] = r.round;
          d["err_p"] = r.err_p;
          d["err_2"] = r.err_2;
          d["kl_fwd"] = r.kl_fwd;
          d["kl_rev"] = r.kl_rev;
          d["coverage"] = r.coverage;
          d["mad_err"] = r.mad_err;
          d["seconds"] = r.seconds;
          d["note"] = r.note;
          out.append(d);
        }
        return out;
      },
      py::arg("config_text"), py::arg("parallelism") = 1);

  m.def(
      "run_experiment_csv",
      [](const std::string& config_text, int parallelism) {
        const ExperimentSpec spec = parse_config(config_text);
        std::ostringstream os;
        write_records_csv(os, run_experiment(spec, parallelism));
        return os.str();
      },
      py::arg("config_text"), py::arg("parallelism") = 1);
}
