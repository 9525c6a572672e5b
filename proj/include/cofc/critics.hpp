#pragma once

#include "cofc/adam.hpp"
#include "cofc/mlp.hpp"
#include "cofc/policy.hpp"
#include "cofc/replay_buffer.hpp"

#include <Eigen/Core>

#include <vector>

namespace cofc {

struct CriticSettings {
  std::vector<int> hidden{64, 64};
  double learning_rate = 1e-3;
  double polyak = 0.02;   // weight of the live network in each target update
  double max_grad_norm = 10.0;
};

/// Reward and cost Q-functions over (observation, action) with target copies.
class Critics {
 public:
  Critics() = default;
  Critics(int obs_dim, const CriticSettings& settings);

  void initialize(Rng& rng);

  static Eigen::MatrixXd stack_inputs(const Eigen::MatrixXd& observations,
                                      const Eigen::RowVectorXd& actions);

  Eigen::RowVectorXd q_reward(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const;
  Eigen::RowVectorXd q_cost(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const;
  Eigen::RowVectorXd target_q_reward(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const;
  Eigen::RowVectorXd target_q_cost(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const;

  struct ActionSensitivity {
    Eigen::RowVectorXd q_reward;
    Eigen::RowVectorXd q_cost;
    Eigen::RowVectorXd dq_reward_da;
    Eigen::RowVectorXd dq_cost_da;
  };
  /// Q values together with their derivative with respect to the action.
  ActionSensitivity action_sensitivity(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const;

  void update_targets();

  MlpD reward;
  MlpD cost;
  MlpD reward_target;
  MlpD cost_target;
  Adam reward_optimizer;
  Adam cost_optimizer;
  double polyak = 0.02;
};

/// Next action in the TD target: the policy mean, a Gaussian sample around
/// it (clipped to the box), or tanh of a sample around the pre-squash mean.
enum class NextAction { Mean, Sample, SquashedSample };

struct TdTargets {
  Eigen::RowVectorXd reward;
  Eigen::RowVectorXd cost;
};

/// y = r + gamma (1 - done) Q_target(s', a'), a' from the policy.
TdTargets td_targets(const Critics& critics, const Batch& batch, const GaussianPolicy& policy,
                     double gamma, NextAction next, Rng& rng);

struct TdLosses {
  double reward = 0.0;
  double cost = 0.0;
};

/// One gradient step on the mean squared TD error of each critic followed by
/// a Polyak update of the targets. Returns the losses before the step.
TdLosses critic_td_update(Critics& critics, const Batch& batch, const GaussianPolicy& policy,
                          double gamma, NextAction next, Rng& rng);

}  // namespace cofc
