#pragma once

#include "cofc/mlp.hpp"
#include "cofc/rng.hpp"

#include <Eigen/Core>

namespace cofc {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian policy over a one-dimensional normalized action.
///
/// The mean network ends in tanh so the mean stays inside the action box
/// [-1, 1]; the log standard deviation is a state-independent parameter
/// clamped to [kLogStdMin, kLogStdMax].
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, const std::vector<int>& hidden, double initial_log_std);

  void initialize(Rng& rng);

  /// Row vector of means, one per observation column.
  Eigen::RowVectorXd mean(const Eigen::MatrixXd& observations) const;
  double mean(const Eigen::VectorXd& observation) const;

  double log_std() const;
  double std() const { return std::exp(log_std()); }
  void set_log_std(double value) { log_std_ = value; }
  /// Unclamped parameter (what the optimizer sees).
  double raw_log_std() const { return log_std_; }

  double sample(const Eigen::VectorXd& observation, Rng& rng) const;

  /// Mean head before its tanh. Read as the mean of a Gaussian over the
  /// pre-squash action z, the policy acts with tanh(z).
  Eigen::RowVectorXd pre_mean(const Eigen::MatrixXd& observations) const;
  double pre_mean(const Eigen::VectorXd& observation) const;
  double squashed_sample(const Eigen::VectorXd& observation, Rng& rng) const;

  Eigen::RowVectorXd log_prob(const Eigen::MatrixXd& observations,
                              const Eigen::RowVectorXd& actions) const;
  static double log_density(double action, double mean, double log_std);

  MlpD& mean_net() { return mean_net_; }
  const MlpD& mean_net() const { return mean_net_; }
  int obs_dim() const { return mean_net_.input_size(); }

 private:
  MlpD mean_net_;
  double log_std_ = -1.0;
};

/// KL(N(m_old, s_old) || N(m_new, s_new)) for scalar Gaussians, given log std.
double gaussian_kl(double mean_old, double log_std_old, double mean_new, double log_std_new);

}  // namespace cofc
