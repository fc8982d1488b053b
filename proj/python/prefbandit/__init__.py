"""Preference-learning experiments on finite contextual bandits.

Thin wrapper over the C++ core: instance generators, softmax policies,
coverage analytics, G-optimal designs, preference/distillation learners and
the experiment harness.
"""

from prefbandit._core import (  # noqa: F401
    Instance,
    divergences,
    feature_covariance,
    fit_loglog_slope,
    g_optimal_design,
    lambda_min,
    load_instance,
    local_coverage_curve,
    make_easy_instance,
    make_skewed_instance,
    make_two_coord_instance,
    min_softmax_over_ball,
    pair_coverage,
    param_error,
    policy_probs,
    preferential_design,
    project_lp_ball,
    rebel_exact_entropies,
    run_experiment,
    run_experiment_csv,
    run_offline_dpo,
    run_online_dpo,
    run_reward_distillation,
    run_two_step,
    save_instance,
)

__all__ = [
    "Instance",
    "divergences",
    "feature_covariance",
    "fit_loglog_slope",
    "g_optimal_design",
    "lambda_min",
    "load_instance",
    "local_coverage_curve",
    "make_easy_instance",
    "make_skewed_instance",
    "make_two_coord_instance",
    "min_softmax_over_ball",
    "pair_coverage",
    "param_error",
    "policy_probs",
    "preferential_design",
    "project_lp_ball",
    "rebel_exact_entropies",
    "run_experiment",
    "run_experiment_csv",
    "run_offline_dpo",
    "run_online_dpo",
    "run_reward_distillation",
    "run_two_step",
    "save_instance",
]
