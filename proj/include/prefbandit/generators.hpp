#pragma once

#include <vector>

#include <Eigen/Core>

#include "prefbandit/instance.hpp"
#include "prefbandit/instance_io.hpp"

namespace prefbandit {

// Balanced +-1 codewords of even length d with pairwise Hamming distance at
// least ceil(d/8), built by greedy packing over random proposals. Throws a
// capacity error if the requested count is not reached within 1e6 proposals.
std::vector<Eigen::VectorXi> balanced_codewords(int d, int count, Rng& rng);

struct GeneratedInstance {
  Instance instance;
  std::vector<Eigen::VectorXd> target_family;  // candidate theta* values
  int chosen_target = 0;
  RecipeHeader recipe;
  bool dim_warning = false;  // d grew past R^3
};

// Single-prompt bandit with a heavily skewed base policy: one dominant
// response and d rare ones, targets near uniform and perturbed along
// codeword directions. Hard for offline learning under the 1-norm geometry.
// Requires R > ln d + 1 and even d; n scales the perturbation size.
GeneratedInstance skewed_base_instance_p1(int d, double R, long n, Rng& rng);

// Single-prompt bandit with the base policy tilted along two coordinates;
// targets sit on a line through the tilt anchor. Requires p > 1, d >= 2,
// R > 1.
GeneratedInstance two_coord_instance(int d, double R, double p, long n, Rng& rng);

// Well-conditioned baseline: uniform base policy, small target, R = 2,
// gamma = 1/R, p = 2.
GeneratedInstance easy_instance(int d, Rng& rng);

// Regenerate from a serialized recipe header; bit-identical given the seed.
GeneratedInstance make_instance(const RecipeHeader& recipe);

}  // namespace prefbandit
