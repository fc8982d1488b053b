#include "prefbandit/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace prefbandit {

namespace {

uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed) : root_(seed) {
  uint64_t s = seed;
  gen_.seed(splitmix64(s));
}

uint64_t Rng::next_u64() { return gen_(); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double Rng::next_gaussian() {
  if (have_cached_gaussian_) {
    have_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_gaussian_ = v * m;
  have_cached_gaussian_ = true;
  return u * m;
}

double Rng::next_exponential() {
  double u;
  do {
    u = next_double();
  } while (u <= 0.0);
  return -std::log(u);
}

int Rng::next_discrete(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw std::invalid_argument("next_discrete: empty probability vector");
  const double u = next_double();
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p < 0.0) throw std::invalid_argument("next_discrete: negative probability");
    if (p > 0.0) last_positive = i;
    acc += p;
    if (u < acc) return i;
  }
  if (last_positive < 0) throw std::invalid_argument("next_discrete: all-zero probability vector");
  return last_positive;
}

int Rng::next_index(int n) {
  if (n <= 0) throw std::invalid_argument("next_index: n must be positive");
  return static_cast<int>(next_double() * n) % n;
}

Rng Rng::split(uint64_t stream) const {
  uint64_t s = root_ ^ (0xd1342543de82ef95ULL * (stream + 1));
  return Rng(splitmix64(s));
}

}  // namespace prefbandit
