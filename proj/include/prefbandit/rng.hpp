#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace prefbandit {

// Seeded generator with implementation-independent derived draws.
// All randomized operations take an Rng& explicitly; two generators
// constructed from the same seed produce identical streams.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via the polar method (no library distribution,
  // so the stream is identical across standard library implementations).
  double next_gaussian();

  // Exponential(1).
  double next_exponential();

  // Index drawn from a probability vector by inverse-CDF scan.
  // The vector must be nonnegative; the last positive entry absorbs
  // rounding slack.
  int next_discrete(const Eigen::VectorXd& probs);

  // Uniform integer in [0, n).
  int next_index(int n);

  // Derived independent generator for a labeled substream.
  Rng split(uint64_t stream) const;

 private:
  std::mt19937_64 gen_;
  uint64_t root_;
  bool have_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

}  // namespace prefbandit
