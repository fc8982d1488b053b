#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefbandit/instance.hpp"

namespace prefbandit {

// Ground-truth scalar reward backing the Bradley-Terry labeler.
// The default table is gamma * theta*^T phi(x,a); an arbitrary table can be
// substituted for misspecification experiments.
class RewardFunction {
 public:
  static RewardFunction true_reward(const Instance& inst);
  static RewardFunction from_table(Eigen::MatrixXd table);

  double reward(int x, int a) const { return table_(x, a); }
  const Eigen::MatrixXd& table() const { return table_; }

  // P(a1 preferred over a2 | x) = sigmoid(r(x,a1) - r(x,a2)).
  double bt_prob(int x, int a1, int a2) const;

 private:
  explicit RewardFunction(Eigen::MatrixXd table) : table_(std::move(table)) {}
  Eigen::MatrixXd table_;
};

// Preference probability induced by a pair of policies:
// sigmoid(gamma ln[pi(a1|x)/pi(a2|x)] - gamma ln[pi'(a1|x)/pi'(a2|x)]).
// Throws if any involved probability is zero (log-ratio undefined).
double induced_pref_prob(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_prime,
                         int x, int a1, int a2);

struct PreferenceRow {
  int round = 0;
  int x = 0;
  int a_plus = 0;
  int a_minus = 0;
  std::string sampler_id;
  uint64_t seed = 0;
};

struct PreferenceDataset {
  std::vector<PreferenceRow> rows;
  size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

void write_preferences_csv(std::ostream& os, const PreferenceDataset& data);
PreferenceDataset read_preferences_csv(std::istream& is);

// Source of unlabeled (x, a1, a2) triples. Both responses of a pair come
// from the same conditional distribution.
class PairSampler {
 public:
  virtual ~PairSampler() = default;
  virtual std::array<int, 3> draw(Rng& rng) const = 0;
  virtual std::string id() const = 0;
};

// x ~ context distribution, a1, a2 ~ pi(.|x) i.i.d.
class PolicyPairSampler : public PairSampler {
 public:
  explicit PolicyPairSampler(const SoftmaxPolicy& pi, std::string id = "policy");
  std::array<int, 3> draw(Rng& rng) const override;
  std::string id() const override { return id_; }

 private:
  const SoftmaxPolicy* pi_;
  std::string id_;
};

// x ~ design x-marginal, a1, a2 ~ design conditional given x.
class DesignPairSampler : public PairSampler {
 public:
  DesignPairSampler(const Instance& inst, const Eigen::MatrixXd& joint_weights,
                    std::string id = "design");
  std::array<int, 3> draw(Rng& rng) const override;
  std::string id() const override { return id_; }

 private:
  Eigen::VectorXd marginal_;      // |X|
  Eigen::MatrixXd conditionals_;  // |X| x |A|
  std::string id_;
};

// Coin flip with the given weight on the first component, then a full pair
// draw from the selected component.
class MixturePairSampler : public PairSampler {
 public:
  MixturePairSampler(const PairSampler& first, const PairSampler& second, double first_weight);
  std::array<int, 3> draw(Rng& rng) const override;
  std::string id() const override;

 private:
  const PairSampler* first_;
  const PairSampler* second_;
  double w_;
};

// Collect n labeled triples: draw a pair, then order it by a Bernoulli draw
// with the Bradley-Terry probability. Reward gaps beyond +-36 label
// deterministically (double-precision sigmoid saturates there). Ties
// (a1 == a2) are kept.
PreferenceDataset collect_dataset(const PairSampler& sampler, long n,
                                  const RewardFunction& labeler, Rng& rng,
                                  int round = 0, uint64_t seed_tag = 0);

}  // namespace prefbandit
