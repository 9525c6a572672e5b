#include "cofc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cofc {

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw Error(ErrorCode::Config, "unknown activation '" + name + "'");
}

GaussianPolicy::GaussianPolicy(int obs_dim, const std::vector<int>& hidden, double initial_log_std)
    : log_std_(initial_log_std) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  mean_net_ = MlpD(sizes, Activation::Tanh, Activation::Tanh);
}

void GaussianPolicy::initialize(Rng& rng) { mean_net_.initialize(rng, 3e-3); }

Eigen::RowVectorXd GaussianPolicy::mean(const Eigen::MatrixXd& observations) const {
  return mean_net_.forward(observations).row(0);
}

double GaussianPolicy::mean(const Eigen::VectorXd& observation) const {
  return mean_net_.forward(observation)[0];
}

double GaussianPolicy::log_std() const { return std::clamp(log_std_, kLogStdMin, kLogStdMax); }

double GaussianPolicy::sample(const Eigen::VectorXd& observation, Rng& rng) const {
  return mean(observation) + std() * rng.normal();
}

Eigen::RowVectorXd GaussianPolicy::pre_mean(const Eigen::MatrixXd& observations) const {
  MlpD::Tape tape;
  mean_net_.forward(observations, &tape);
  return tape.output_preactivation.row(0);
}

double GaussianPolicy::pre_mean(const Eigen::VectorXd& observation) const {
  return pre_mean(Eigen::MatrixXd(observation))[0];
}

double GaussianPolicy::squashed_sample(const Eigen::VectorXd& observation, Rng& rng) const {
  return std::tanh(pre_mean(observation) + std() * rng.normal());
}

double GaussianPolicy::log_density(double action, double mean, double log_std) {
  const double z = (action - mean) * std::exp(-log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
}

Eigen::RowVectorXd GaussianPolicy::log_prob(const Eigen::MatrixXd& observations,
                                            const Eigen::RowVectorXd& actions) const {
  const Eigen::RowVectorXd mu = mean(observations);
  if (mu.size() != actions.size()) throw Error(ErrorCode::ShapeMismatch, "action count mismatch");
  Eigen::RowVectorXd out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) out[i] = log_density(actions[i], mu[i], log_std());
  return out;
}

double gaussian_kl(double mean_old, double log_std_old, double mean_new, double log_std_new) {
  const double var_old = std::exp(2.0 * log_std_old);
  const double var_new = std::exp(2.0 * log_std_new);
  const double diff = mean_old - mean_new;
  return log_std_new - log_std_old + (var_old + diff * diff) / (2.0 * var_new) - 0.5;
}

}  // namespace cofc
