#include "prefbandit/generators.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prefbandit {

namespace {

constexpr double kPackingDistanceFraction = 1.0 / 8.0;  // required d_Ham >= d/8
constexpr double kPackingRate = 1.0 / 8.0;              // perturbation scale constant
constexpr int kTwoCoordFamilyHalf = 8;                  // targets j in {-M..M}

Eigen::MatrixXd tabular_features(int num_responses) {
  return Eigen::MatrixXd::Identity(num_responses, num_responses);
}

}  // namespace

std::vector<Eigen::VectorXi> balanced_codewords(int d, int count, Rng& rng) {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("balanced_codewords: d must be even");
  if (count < 1) throw std::invalid_argument("balanced_codewords: count must be positive");
  const int min_dist = static_cast<int>(std::ceil(d * kPackingDistanceFraction));

  std::vector<Eigen::VectorXi> words;
  Eigen::VectorXi proposal(d);
  for (long attempt = 0; attempt < 1000000 && static_cast<int>(words.size()) < count; ++attempt) {
    for (int i = 0; i < d; ++i) proposal[i] = (i < d / 2) ? 1 : -1;
    for (int i = d - 1; i > 0; --i) {
      const int j = rng.next_index(i + 1);
      std::swap(proposal[i], proposal[j]);
    }
    bool ok = true;
    for (const auto& w : words) {
      int dist = 0;
      for (int i = 0; i < d; ++i)
        if (w[i] != proposal[i]) ++dist;
      if (dist < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) words.push_back(proposal);
  }
  if (static_cast<int>(words.size()) < count) {
    std::ostringstream os;
    os << "balanced_codewords: could not pack " << count << " words of length " << d
       << " at distance " << min_dist;
    throw std::runtime_error(os.str());
  }
  return words;
}

GeneratedInstance skewed_base_instance_p1(int d, double R, long n, Rng& rng) {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("skewed instance: d must be even");
  if (n < 1) throw std::invalid_argument("skewed instance: n must be positive");
  if (!(R > std::log(static_cast<double>(d)) + 1.0)) {
    std::ostringstream os;
    os << "skewed instance: requires R > ln d + 1 = " << std::log(static_cast<double>(d)) + 1.0;
    throw std::invalid_argument(os.str());
  }

  const double eps = d * std::exp(1.0 - R);  // in (0,1) by the precondition
  const int A = d + 1;

  GeneratedInstance out;
  Instance& inst = out.instance;
  inst.num_prompts = 1;
  inst.num_responses = A;
  inst.dim = A;
  inst.context_dist = Eigen::VectorXd::Ones(1);
  inst.base_policy.resize(1, A);
  inst.base_policy(0, 0) = 1.0 - eps;
  for (int a = 1; a < A; ++a) inst.base_policy(0, a) = eps / d;
  inst.features = tabular_features(A);
  inst.gamma = 1.0 / R;
  inst.radius = R;
  inst.norm_order = 1.0;

  const double anchor = std::log(eps / (d * (1.0 - eps)));
  const int count = std::max(2, std::min(64, static_cast<int>(std::ceil(std::exp(d / 8.0)))));
  const auto words = balanced_codewords(d, count, rng);
  const double tau =
      std::sqrt(std::min(kPackingRate * d / (4.0 * n * eps), 1.0 / (static_cast<double>(d) * d)));

  for (const auto& w : words) {
    Eigen::VectorXd theta(A);
    theta[0] = anchor;
    for (int i = 0; i < d; ++i) theta[i + 1] = tau * w[i];
    if (theta.lpNorm<1>() > R + 1e-12) {
      std::ostringstream os;
      os << "skewed instance: target leaves the radius ball (R too close to ln d + 1; "
         << "||theta||_1 = " << theta.lpNorm<1>() << ")";
      throw std::invalid_argument(os.str());
    }
    out.target_family.push_back(std::move(theta));
  }
  out.chosen_target = rng.next_index(static_cast<int>(out.target_family.size()));
  inst.true_param = out.target_family[out.chosen_target];

  out.recipe = {"skewed-p1", d, R, 1.0, 0, n};
  out.dim_warning = d > R * R * R;
  inst.validate();
  return out;
}

GeneratedInstance two_coord_instance(int d, double R, double p, long n, Rng& rng) {
  if (d < 2) throw std::invalid_argument("two-coord instance: need d >= 2");
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("two-coord instance: requires p in (1, 2]");
  if (!(R > 1.0)) throw std::invalid_argument("two-coord instance: requires R > 1");
  if (n < 1) throw std::invalid_argument("two-coord instance: n must be positive");

  GeneratedInstance out;
  Instance& inst = out.instance;
  inst.num_prompts = 1;
  inst.num_responses = d;
  inst.dim = d;
  inst.context_dist = Eigen::VectorXd::Ones(1);
  inst.features = tabular_features(d);
  inst.gamma = 1.0 / R;
  inst.radius = R;
  inst.norm_order = p;

  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(d);
  const double c = std::pow(2.0, -1.0 / p) * (R - 1.0);
  anchor[0] = -c;
  anchor[1] = c;

  // Base policy = softmax(-anchor).
  Eigen::VectorXd logits = -anchor;
  const double lz = log_sum_exp(logits);
  inst.base_policy.resize(1, d);
  for (int a = 0; a < d; ++a) inst.base_policy(0, a) = std::exp(logits[a] - lz);

  const int M = kTwoCoordFamilyHalf;
  const double growth = std::exp(std::pow(2.0, 1.0 - 1.0 / p) * R);
  const double tau =
      std::min(std::sqrt(growth * std::log(2.0 * M + 1.0) / (static_cast<double>(M) * M * n)),
               1.0 / M);
  for (int j = -M; j <= M; ++j) {
    Eigen::VectorXd theta = anchor;
    theta[1] += j * tau;
    out.target_family.push_back(std::move(theta));
  }
  out.chosen_target = rng.next_index(static_cast<int>(out.target_family.size()));
  inst.true_param = out.target_family[out.chosen_target];

  out.recipe = {"two-coord-p", d, R, p, 0, n};
  out.dim_warning = d > R * R * R;
  inst.validate();
  return out;
}

GeneratedInstance easy_instance(int d, Rng& rng) {
  if (d < 2) throw std::invalid_argument("easy instance: need d >= 2");
  GeneratedInstance out;
  Instance& inst = out.instance;
  inst.num_prompts = 1;
  inst.num_responses = d;
  inst.dim = d;
  inst.context_dist = Eigen::VectorXd::Ones(1);
  inst.base_policy = Eigen::MatrixXd::Constant(1, d, 1.0 / d);
  inst.features = tabular_features(d);
  inst.radius = 2.0;
  inst.gamma = 1.0 / inst.radius;
  inst.norm_order = 2.0;

  Eigen::VectorXd theta(d);
  for (int i = 0; i < d; ++i) theta[i] = rng.uniform(-0.5, 0.5);
  const double norm = theta.norm();
  if (norm > inst.radius) theta *= inst.radius / norm;
  inst.true_param = theta;
  out.target_family.push_back(theta);
  out.chosen_target = 0;

  out.recipe = {"easy", d, inst.radius, 2.0, 0, 0};
  inst.validate();
  return out;
}

GeneratedInstance make_instance(const RecipeHeader& recipe) {
  Rng rng(recipe.seed);
  GeneratedInstance out;
  if (recipe.kind == "easy") {
    out = easy_instance(recipe.d, rng);
  } else if (recipe.kind == "skewed-p1") {
    out = skewed_base_instance_p1(recipe.d, recipe.R, recipe.n_hint > 0 ? recipe.n_hint : 8192,
                                  rng);
  } else if (recipe.kind == "two-coord-p") {
    out = two_coord_instance(recipe.d, recipe.R, recipe.p,
                             recipe.n_hint > 0 ? recipe.n_hint : 8192, rng);
  } else {
    throw std::invalid_argument("make_instance: unknown recipe kind '" + recipe.kind + "'");
  }
  out.recipe.seed = recipe.seed;
  return out;
}

}  // namespace prefbandit
