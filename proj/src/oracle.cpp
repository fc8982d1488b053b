#include "prefbandit/oracle.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace prefbandit {

namespace {
constexpr double kSaturation = 36.0;  // |dr| beyond which sigma(dr) rounds to {0,1}
}

RewardFunction RewardFunction::true_reward(const Instance& inst) {
  Eigen::MatrixXd table(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x)
    for (int a = 0; a < inst.num_responses; ++a)
      table(x, a) = inst.gamma * inst.feature(x, a).dot(inst.true_param);
  return RewardFunction(std::move(table));
}

RewardFunction RewardFunction::from_table(Eigen::MatrixXd table) {
  return RewardFunction(std::move(table));
}

double RewardFunction::bt_prob(int x, int a1, int a2) const {
  if (x < 0 || x >= table_.rows() || a1 < 0 || a1 >= table_.cols() || a2 < 0 ||
      a2 >= table_.cols())
    throw std::invalid_argument("bt_prob: index out of range");
  return sigmoid(table_(x, a1) - table_(x, a2));
}

double induced_pref_prob(const SoftmaxPolicy& pi, const SoftmaxPolicy& pi_prime,
                         int x, int a1, int a2) {
  if (&pi.instance() != &pi_prime.instance())
    throw std::invalid_argument("induced_pref_prob: policies live on different instances");
  const double l1 = pi.log_prob(x, a1), l2 = pi.log_prob(x, a2);
  const double m1 = pi_prime.log_prob(x, a1), m2 = pi_prime.log_prob(x, a2);
  if (!std::isfinite(l1) || !std::isfinite(l2) || !std::isfinite(m1) || !std::isfinite(m2))
    throw std::invalid_argument("induced_pref_prob: zero-probability response");
  const double gamma = pi.instance().gamma;
  return sigmoid(gamma * ((l1 - l2) - (m1 - m2)));
}

PolicyPairSampler::PolicyPairSampler(const SoftmaxPolicy& pi, std::string id)
    : pi_(&pi), id_(std::move(id)) {}

std::array<int, 3> PolicyPairSampler::draw(Rng& rng) const {
  const int x = rng.next_discrete(pi_->instance().context_dist);
  const int a1 = pi_->sample_response(x, rng);
  const int a2 = pi_->sample_response(x, rng);
  return {x, a1, a2};
}

DesignPairSampler::DesignPairSampler(const Instance& inst, const Eigen::MatrixXd& joint_weights,
                                     std::string id)
    : id_(std::move(id)) {
  if (joint_weights.rows() != inst.num_prompts || joint_weights.cols() != inst.num_responses)
    throw std::invalid_argument("design sampler: weight shape mismatch");
  marginal_ = joint_weights.rowwise().sum();
  conditionals_.resize(joint_weights.rows(), joint_weights.cols());
  for (int x = 0; x < joint_weights.rows(); ++x) {
    if (marginal_[x] > 0.0)
      conditionals_.row(x) = joint_weights.row(x) / marginal_[x];
    else
      conditionals_.row(x).setZero();
  }
}

std::array<int, 3> DesignPairSampler::draw(Rng& rng) const {
  const int x = rng.next_discrete(marginal_);
  const int a1 = rng.next_discrete(conditionals_.row(x));
  const int a2 = rng.next_discrete(conditionals_.row(x));
  return {x, a1, a2};
}

MixturePairSampler::MixturePairSampler(const PairSampler& first, const PairSampler& second,
                                       double first_weight)
    : first_(&first), second_(&second), w_(first_weight) {
  if (w_ < 0.0 || w_ > 1.0)
    throw std::invalid_argument("mixture sampler: weight must lie in [0,1]");
}

std::array<int, 3> MixturePairSampler::draw(Rng& rng) const {
  return rng.next_double() < w_ ? first_->draw(rng) : second_->draw(rng);
}

std::string MixturePairSampler::id() const {
  return "mix(" + first_->id() + "," + second_->id() + ")";
}

PreferenceDataset collect_dataset(const PairSampler& sampler, long n,
                                  const RewardFunction& labeler, Rng& rng, int round,
                                  uint64_t seed_tag) {
  if (n < 1) throw std::invalid_argument("collect_dataset: need at least one sample");
  PreferenceDataset data;
  data.rows.reserve(static_cast<size_t>(n));
  const std::string id = sampler.id();
  for (long i = 0; i < n; ++i) {
    const auto [x, a1, a2] = sampler.draw(rng);
    const double dr = labeler.reward(x, a1) - labeler.reward(x, a2);
    double p;
    if (dr > kSaturation)
      p = 1.0;
    else if (dr < -kSaturation)
      p = 0.0;
    else
      p = sigmoid(dr);
    const bool a1_wins = rng.next_double() < p;
    PreferenceRow row;
    row.round = round;
    row.x = x;
    row.a_plus = a1_wins ? a1 : a2;
    row.a_minus = a1_wins ? a2 : a1;
    row.sampler_id = id;
    row.seed = seed_tag;
    data.rows.push_back(std::move(row));
  }
  return data;
}

void write_preferences_csv(std::ostream& os, const PreferenceDataset& data) {
  os << "round,x,a_plus,a_minus,sampler_id,seed\n";
  for (const auto& r : data.rows) {
    os << r.round << ',' << r.x << ',' << r.a_plus << ',' << r.a_minus << ',' << r.sampler_id
       << ',' << r.seed << '\n';
  }
}

PreferenceDataset read_preferences_csv(std::istream& is) {
  PreferenceDataset data;
  std::string line;
  if (!std::getline(is, line) || line != "round,x,a_plus,a_minus,sampler_id,seed")
    throw std::invalid_argument("preference csv: missing or malformed header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    PreferenceRow r;
    auto next = [&]() {
      if (!std::getline(ls, tok, ',')) throw std::invalid_argument("preference csv: short row");
      return tok;
    };
    r.round = std::stoi(next());
    r.x = std::stoi(next());
    r.a_plus = std::stoi(next());
    r.a_minus = std::stoi(next());
    r.sampler_id = next();
    r.seed = std::stoull(next());
    data.rows.push_back(std::move(r));
  }
  return data;
}

}  // namespace prefbandit
