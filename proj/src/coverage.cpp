#include "prefbandit/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "prefbandit/instance_io.hpp"

namespace prefbandit {

namespace {
constexpr double kEigTruncation = 1e-10;    // relative to the top eigenvalue
constexpr double kRangeResidual = 1e-8;     // relative out-of-range mass threshold
}  // namespace

Eigen::MatrixXd joint_feature_covariance(const Instance& inst,
                                         const Eigen::MatrixXd& joint_weights) {
  if (joint_weights.rows() != inst.num_prompts || joint_weights.cols() != inst.num_responses)
    throw std::invalid_argument("joint_feature_covariance: weight shape mismatch");
  const int d = inst.dim;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const double wx = joint_weights.row(x).sum();
    if (wx <= 0.0) continue;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int a = 0; a < inst.num_responses; ++a) {
      const double w = joint_weights(x, a) / wx;
      if (w > 0.0) mean += w * inst.feature(x, a);
    }
    for (int a = 0; a < inst.num_responses; ++a) {
      const double w = joint_weights(x, a);
      if (w <= 0.0) continue;
      const Eigen::VectorXd c = inst.feature(x, a) - mean;
      v.noalias() += w * (c * c.transpose());
    }
  }
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd feature_covariance(const SoftmaxPolicy& pi) {
  const Instance& inst = pi.instance();
  Eigen::MatrixXd joint(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x)
    joint.row(x) = inst.context_dist[x] * pi.probs(x).transpose();
  return joint_feature_covariance(inst, joint);
}

double pair_coverage_from(const Eigen::MatrixXd& v_base, const Eigen::MatrixXd& v_target) {
  const int d = static_cast<int>(v_base.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v_base);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double top = evals.maxCoeff();
  const double cut = std::max(top, 0.0) * kEigTruncation;

  std::vector<int> keep;
  for (int i = 0; i < d; ++i)
    if (evals[i] > cut) keep.push_back(i);

  const double target_scale = std::max(v_target.cwiseAbs().maxCoeff(), 1e-300);
  if (keep.empty()) {
    // Zero base covariance: any nonzero target mass is uncovered.
    return (v_target.cwiseAbs().maxCoeff() <= 1e-14) ? 1.0 : kUnbounded;
  }

  Eigen::MatrixXd basis(d, static_cast<int>(keep.size()));
  Eigen::VectorXd lam(static_cast<int>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<int>(j)) = es.eigenvectors().col(keep[j]);
    lam[static_cast<int>(j)] = evals[keep[j]];
  }

  // Out-of-range mass of the target covariance.
  if (keep.size() < static_cast<size_t>(d)) {
    const Eigen::MatrixXd proj = basis * basis.transpose();
    const Eigen::MatrixXd residual =
        (Eigen::MatrixXd::Identity(d, d) - proj) * v_target *
        (Eigen::MatrixXd::Identity(d, d) - proj);
    if (residual.cwiseAbs().maxCoeff() > kRangeResidual * target_scale) return kUnbounded;
  }

  const Eigen::VectorXd inv_sqrt = lam.array().sqrt().inverse();
  const Eigen::MatrixXd w = basis * inv_sqrt.asDiagonal();
  const Eigen::MatrixXd m = w.transpose() * v_target * w;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ms(0.5 * (m + m.transpose()));
  return std::max(ms.eigenvalues().maxCoeff(), 0.0);
}

double pair_coverage(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_target) {
  if (&pi.instance() != &pi_target.instance())
    throw std::invalid_argument("pair_coverage: policies live on different instances");
  return pair_coverage_from(feature_covariance(pi), feature_covariance(pi_target));
}

double lambda_min_on_identifiable(const Instance& inst, const Eigen::MatrixXd& v) {
  const int d = inst.dim;
  if (!inst.tabular()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    return es.eigenvalues().minCoeff();
  }
  // Orthonormal basis of {1}^perp via Householder-style construction.
  Eigen::MatrixXd q(d, d - 1);
  for (int j = 0; j < d - 1; ++j) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(d);
    // Helmert basis: first j+1 entries 1, entry j+1 equals -(j+1), normalized.
    for (int i = 0; i <= j; ++i) col[i] = 1.0;
    col[j + 1] = -(j + 1.0);
    q.col(j) = col / col.norm();
  }
  const Eigen::MatrixXd vs = q.transpose() * v * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (vs + vs.transpose()));
  return es.eigenvalues().minCoeff();
}

double lambda_min_on_identifiable(const SoftmaxPolicy& pi) {
  return lambda_min_on_identifiable(pi.instance(), feature_covariance(pi));
}

Eigen::VectorXd sample_lp_ball(const Eigen::VectorXd& center, double radius, double p, Rng& rng) {
  const int d = static_cast<int>(center.size());
  if (radius < 0.0) throw std::invalid_argument("sample_lp_ball: negative radius");
  if (radius == 0.0) return center;
  Eigen::VectorXd dir(d);
  if (p == 1.0) {
    // Exponential spacings give a uniform point on the simplex; random signs
    // spread it over the L1 sphere.
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      dir[i] = rng.next_exponential();
      s += dir[i];
    }
    dir /= s;
    for (int i = 0; i < d; ++i)
      if (rng.next_double() < 0.5) dir[i] = -dir[i];
  } else if (p == 2.0) {
    for (int i = 0; i < d; ++i) dir[i] = rng.next_gaussian();
    dir.normalize();
  } else {
    // General p in (1,2): rejection from the enclosing L2 ball (d is small
    // wherever this path is used).
    for (;;) {
      for (int i = 0; i < d; ++i) dir[i] = rng.uniform(-1.0, 1.0);
      const double norm = lp_norm(dir, p);
      if (norm <= 1.0 && norm > 0.0) {
        dir /= norm;
        break;
      }
    }
  }
  const double scale = radius * std::pow(rng.next_double(), 1.0 / d);
  return center + scale * dir;
}

namespace {

// Radial clamp onto the Lp ball around the center. The coordinate-ascent
// refinement only needs feasibility, not the exact euclidean projection
// (which lives in the optimizer for p = 1, 2).
Eigen::VectorXd clamp_to_ball(const Eigen::VectorXd& v, const Eigen::VectorXd& center,
                              double radius, double p) {
  const Eigen::VectorXd diff = v - center;
  const double norm = lp_norm(diff, p);
  if (norm <= radius) return v;
  return center + diff * (radius / norm);
}

}  // namespace

CoveragePoint local_coverage_estimate(const Instance& inst, double r, double p, int budget,
                                      Rng& rng) {
  if (budget <= 0) throw std::invalid_argument("local_coverage_estimate: budget must be positive");
  if (r < 0.0 || r > inst.radius + 1e-9)
    throw std::invalid_argument("local_coverage_estimate: radius outside [0, R]");

  const Eigen::VectorXd center = inst.true_param;
  const SoftmaxPolicy target(inst, center);
  const Eigen::MatrixXd v_target = feature_covariance(target);

  auto eval = [&](const Eigen::VectorXd& theta) {
    return pair_coverage_from(feature_covariance(SoftmaxPolicy(inst, theta)), v_target);
  };

  CoveragePoint out;
  out.r = r;
  out.arg_theta = center;
  out.c_hat = eval(center);  // = 1 at the center

  if (r == 0.0) return out;

  for (int i = 0; i < budget; ++i) {
    const Eigen::VectorXd cand = sample_lp_ball(center, r, p, rng);
    const double c = eval(cand);
    if (std::isfinite(c) && c > out.c_hat) {
      out.c_hat = c;
      out.arg_theta = cand;
    }
  }

  // Projected coordinate ascent from the best sample, multi-scale steps.
  const double scales[] = {1.0, 0.3, 0.1, 0.03, 0.01};
  bool improved = true;
  int sweeps = 0;
  while (improved && sweeps < 40) {
    improved = false;
    ++sweeps;
    for (int j = 0; j < inst.dim; ++j) {
      for (double s : scales) {
        for (double sign : {+1.0, -1.0}) {
          Eigen::VectorXd cand = out.arg_theta;
          cand[j] += sign * s * r;
          cand = clamp_to_ball(cand, center, r, p);
          const double c = eval(cand);
          if (std::isfinite(c) && c > out.c_hat * (1.0 + 1e-12)) {
            out.c_hat = c;
            out.arg_theta = cand;
            improved = true;
          }
        }
      }
    }
  }
  return out;
}

CoverageCurve local_coverage_curve(const Instance& inst, const std::vector<double>& radii,
                                   double p, int budget, Rng& rng) {
  CoverageCurve curve;
  CoveragePoint best;
  best.c_hat = 0.0;
  for (double r : radii) {
    CoveragePoint pt = local_coverage_estimate(inst, r, p, budget, rng);
    // The maximizer from a smaller ball stays feasible in a larger one, so the
    // running maximum preserves both monotonicity and the certificate.
    if (best.c_hat > pt.c_hat) {
      pt.c_hat = best.c_hat;
      pt.arg_theta = best.arg_theta;
    }
    best = pt;
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

void write_coverage_csv(std::ostream& os, const CoverageCurve& curve) {
  os << "r,C_hat,argmax_theta\n";
  for (const auto& pt : curve.points) {
    os << fmt_double(pt.r) << ',' << fmt_double(pt.c_hat) << ',';
    for (int i = 0; i < pt.arg_theta.size(); ++i) {
      if (i) os << ';';
      os << fmt_double(pt.arg_theta[i]);
    }
    os << '\n';
  }
}

CoverageCurve read_coverage_csv(std::istream& is) {
  CoverageCurve curve;
  std::string line;
  if (!std::getline(is, line) || line != "r,C_hat,argmax_theta")
    throw std::invalid_argument("coverage csv: missing or malformed header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string rtok, ctok, ttok;
    if (!std::getline(ls, rtok, ',') || !std::getline(ls, ctok, ',') || !std::getline(ls, ttok))
      throw std::invalid_argument("coverage csv: short row");
    CoveragePoint pt;
    pt.r = parse_double(rtok);
    pt.c_hat = parse_double(ctok);
    std::vector<double> vals;
    std::istringstream ts(ttok);
    std::string v;
    while (std::getline(ts, v, ';')) vals.push_back(parse_double(v));
    pt.arg_theta = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

MinSoftmaxResult min_softmax_over_ball(int d, double R, double p) {
  if (d < 2) throw std::invalid_argument("min_softmax_over_ball: need d >= 2");
  if (!(R > 0.0)) throw std::invalid_argument("min_softmax_over_ball: R must be positive");
  if (p < 1.0 || p > 2.0) throw std::invalid_argument("min_softmax_over_ball: p must lie in [1,2]");

  MinSoftmaxResult out;
  if (p == 1.0) {
    // All positive mass collapses onto a single coordinate.
    out.value = 1.0 / ((d - 1) * std::exp(R) + 1.0);
    out.arg_theta = Eigen::VectorXd::Zero(d);
    out.arg_theta[0] = -R;
    return out;
  }

  // Reduced family: theta = (-delta, alpha x (d-k-1), beta x k) with
  // delta^p + (d-k-1) alpha^p + k beta^p = R^p. The objective
  // softmax(theta)_1 = 1 / (1 + (d-k-1) e^{alpha+delta} + k e^{beta+delta})
  // is minimized over (k, alpha, beta) with a golden-section search in beta
  // and alpha recovered from the stationarity condition
  // e^alpha alpha^{1-p} = e^beta beta^{1-p} (two-root structure of
  // z -> e^z z^{1-p}).
  auto objective = [&](int k, double alpha, double beta) -> double {
    const double rest = std::pow(R, p) - (d - k - 1) * std::pow(alpha, p) - k * std::pow(beta, p);
    if (rest < 0.0) return 2.0;  // infeasible
    const double delta = std::pow(rest, 1.0 / p);
    const double denom =
        1.0 + (d - k - 1) * std::exp(alpha + delta) + k * std::exp(beta + delta);
    return 1.0 / denom;
  };

  auto alpha_from_beta = [&](double beta) -> double {
    // Smaller root of e^z z^{1-p} = e^beta beta^{1-p} on (0, p-1].
    if (beta <= p - 1.0 || beta <= 0.0) return beta;
    const double target = beta + (1.0 - p) * std::log(beta);
    double lo = 1e-12, hi = p - 1.0;
    auto h = [&](double z) { return z + (1.0 - p) * std::log(z); };
    if (h(hi) < target) return hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      // h is decreasing on (0, p-1)
      if (h(mid) > target)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  double best = 1.0 / d;
  int best_k = 1;
  double best_alpha = 0.0, best_beta = 0.0;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int k = 1; k <= d - 1; ++k) {
    for (int mode = 0; mode < 2; ++mode) {
      // mode 0: alpha from stationarity; mode 1: alpha pinned to 0 (boundary).
      auto f = [&](double beta) {
        const double alpha = (mode == 0) ? alpha_from_beta(beta) : 0.0;
        return objective(k, std::min(alpha, beta), beta);
      };
      double lo = 0.0, hi = R / std::pow(static_cast<double>(k), 1.0 / p);
      double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
      double f1 = f(x1), f2 = f(x2);
      for (int it = 0; it < 200; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - inv_phi * (hi - lo);
          f1 = f(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + inv_phi * (hi - lo);
          f2 = f(x2);
        }
      }
      const double beta = 0.5 * (lo + hi);
      const double alpha = (mode == 0) ? std::min(alpha_from_beta(beta), beta) : 0.0;
      const double val = objective(k, alpha, beta);
      if (val < best) {
        best = val;
        best_k = k;
        best_alpha = alpha;
        best_beta = beta;
      }
    }
  }

  const double rest =
      std::pow(R, p) - (d - best_k - 1) * std::pow(best_alpha, p) - best_k * std::pow(best_beta, p);
  const double delta = std::pow(std::max(rest, 0.0), 1.0 / p);
  out.value = best;
  out.arg_theta = Eigen::VectorXd::Zero(d);
  out.arg_theta[0] = -delta;
  for (int i = 1; i < d - best_k; ++i) out.arg_theta[i] = best_alpha;
  for (int i = d - best_k; i < d; ++i) out.arg_theta[i] = best_beta;
  return out;
}

double mad_linear(const Instance& inst, const Eigen::MatrixXd& joint_weights,
                  const Eigen::VectorXd& u) {
  if (joint_weights.rows() != inst.num_prompts || joint_weights.cols() != inst.num_responses)
    throw std::invalid_argument("mad_linear: weight shape mismatch");
  double mad = 0.0;
  for (int x = 0; x < inst.num_prompts; ++x) {
    const double wx = joint_weights.row(x).sum();
    if (wx <= 0.0) continue;
    double mean = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) {
      const double w = joint_weights(x, a) / wx;
      if (w > 0.0) mean += w * inst.feature(x, a).dot(u);
    }
    for (int a = 0; a < inst.num_responses; ++a) {
      const double w = joint_weights(x, a);
      if (w > 0.0) mad += w * std::abs(inst.feature(x, a).dot(u) - mean);
    }
  }
  return mad;
}

double mad_linear(const SoftmaxPolicy& pi, const Eigen::VectorXd& u) {
  const Instance& inst = pi.instance();
  Eigen::MatrixXd joint(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x)
    joint.row(x) = inst.context_dist[x] * pi.probs(x).transpose();
  return mad_linear(inst, joint, u);
}

double mad_pair_coverage(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_target,
                         const std::vector<Eigen::VectorXd>& probes) {
  if (probes.empty()) throw std::invalid_argument("mad_pair_coverage: no probes");
  double worst = 0.0;
  for (const auto& u : probes) {
    const double base = mad_linear(pi, u);
    const double target = mad_linear(pi_target, u);
    double ratio;
    if (target <= 0.0 && base <= 0.0)
      ratio = 1.0;  // degenerate probe, carries no signal
    else if (base <= 0.0)
      ratio = kUnbounded;
    else
      ratio = target / base;
    worst = std::max(worst, ratio);
  }
  return worst;
}

namespace {

double interpolate_curve(const CoverageCurve& curve, double r) {
  const auto& pts = curve.points;
  if (r <= pts.front().r) return pts.front().c_hat;
  if (r >= pts.back().r) return pts.back().c_hat;
  for (size_t i = 1; i < pts.size(); ++i) {
    if (r <= pts[i].r) {
      const double t = (r - pts[i - 1].r) / (pts[i].r - pts[i - 1].r);
      return pts[i - 1].c_hat + t * (pts[i].c_hat - pts[i - 1].c_hat);
    }
  }
  return pts.back().c_hat;
}

}  // namespace

RadiusRecursion radius_recursion_predict(const CoverageCurve& curve, double n, double gamma,
                                         double R, int d, double p, double lambda, double delta,
                                         int K) {
  if (!(n > 0.0)) throw std::invalid_argument("radius recursion: n must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("radius recursion: gamma must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("radius recursion: lambda must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("radius recursion: delta must lie in (0,1)");
  if (K < 1) throw std::invalid_argument("radius recursion: K must be positive");
  if (curve.points.size() < 1 || curve.points.front().r > 1e-12 ||
      curve.points.back().r < R - 1e-9)
    throw std::invalid_argument("radius recursion: curve must cover [0, R]");

  const double xi = 52.0 * std::exp(4.0 * gamma * R) * std::pow(static_cast<double>(d), 2.0 / p) *
                    std::log(9.0 * gamma * R * n / delta) / (lambda * gamma * gamma * n);
  const double cap = std::min(1.0 / (2.0 * gamma), R);

  RadiusRecursion out;
  out.radii.push_back(R);
  for (int k = 0; k < K; ++k) {
    const double c = interpolate_curve(curve, out.radii.back());
    const double next = std::sqrt(std::max(xi * c, 0.0));
    if (next > cap) {
      out.side_condition_ok = false;
      out.truncated_at = k + 1;
      break;
    }
    out.radii.push_back(next);
  }
  return out;
}

ConvexityReport sqrt_convexity_check(const CoverageCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 3)
    throw std::invalid_argument("sqrt_convexity_check: need at least three grid points");
  ConvexityReport rep;
  for (size_t i = 1; i + 1 < pts.size(); ++i) {
    const double r0 = pts[i - 1].r, r1 = pts[i].r, r2 = pts[i + 1].r;
    const double s0 = std::sqrt(pts[i - 1].c_hat), s1 = std::sqrt(pts[i].c_hat),
                 s2 = std::sqrt(pts[i + 1].c_hat);
    const double t = (r1 - r0) / (r2 - r0);
    const double chord = s0 + t * (s2 - s0);
    const double violation = s1 - chord;
    if (violation > rep.worst_violation) {
      rep.worst_violation = violation;
      rep.worst_index = static_cast<int>(i);
    }
  }
  rep.convex = rep.worst_violation <= 1e-9;
  return rep;
}

}  // namespace prefbandit
