#pragma once

#include "cofc/critics.hpp"
#include "cofc/policy.hpp"
#include "cofc/training.hpp"

#include <Eigen/Core>

namespace cofc {

/// Discounted per-trajectory limit equivalent to an undiscounted episode
/// budget `eps_T` spread evenly over `horizon` steps.
double cost_limit(double eps_T, std::size_t horizon, double gamma);

struct CostBudget {
  double eps_T = 1.5;
  std::size_t horizon = 1;
  double gamma = 0.99;

  double eps1() const { return cost_limit(eps_T, horizon, gamma); }
  /// Maps an undiscounted episode cost onto the discounted scale of eps1.
  double discounted(double episode_cost) const;
};

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

/// Lagrange multiplier driven by a PID controller on the constraint error.
struct PidDualState {
  PidGains gains;
  double lambda = 0.0;
  double integral = 0.0;
  double prev_cost = 0.0;
  bool has_prev = false;  // no derivative term before the first measurement
};

/// Projected PID step: error = J_c - eps1, derivative = (J_c - previous)_+,
/// integral accumulates the error and is projected onto [0, inf), and the
/// multiplier is the projected PID sum.
double pid_dual_update(PidDualState& state, double measured_cost, double eps1);

/// -mean(Q_r - lambda Q_c) / (1 + lambda).
double lagrangian_actor_loss(const Eigen::RowVectorXd& q_reward, const Eigen::RowVectorXd& q_cost,
                             double lambda);

struct LagrangianSettings {
  TrainSettings common;
  PidGains pid{1.0, 1.0, 0.0};
  std::size_t policy_delay = 1;  // critic updates per actor update
  /// Exploration noise, added before the mean head's tanh: its log std moves
  /// linearly from noise_log_std to final_noise_log_std over
  /// noise_decay_epochs (0 keeps it constant).
  double noise_log_std = -0.5;
  double final_noise_log_std = -0.5;
  std::size_t noise_decay_epochs = 0;
  /// Weight of a quadratic penalty on the mean head's pre-tanh value; keeps
  /// the actor out of the flat tails of tanh.
  double preactivation_penalty = 1e-3;

  void validate() const;
};

/// Off-policy deterministic actor-critic with a PID-updated multiplier.
class LagrangianTrainer {
 public:
  LagrangianTrainer(LagrangianSettings settings, TaskFactory factory, std::uint64_t seed);

  TrainingResult train(const TrainHooks& hooks = {});

  /// One deterministic-policy-gradient step on the normalized Lagrangian;
  /// returns the loss before the step.
  double actor_step(const Eigen::MatrixXd& states);

  const GaussianPolicy& policy() const { return policy_; }
  GaussianPolicy& policy() { return policy_; }
  const Critics& critics() const { return critics_; }
  Critics& critics() { return critics_; }
  const PidDualState& dual() const { return dual_; }
  PidDualState& dual() { return dual_; }
  Adam& policy_optimizer() { return policy_optimizer_; }
  const Adam& policy_optimizer() const { return policy_optimizer_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  const LagrangianSettings& settings() const { return settings_; }
  double eps1() const { return budget_.eps1(); }
  /// Exploration log std used during `epoch` (1-based).
  double exploration_log_std(std::size_t epoch) const;

 private:
  LagrangianSettings settings_;
  TaskFactory factory_;
  CostBudget budget_;
  Rng rng_;
  GaussianPolicy policy_;
  Adam policy_optimizer_;
  Critics critics_;
  PidDualState dual_;
  std::vector<RolloutWorker> workers_;
  std::unique_ptr<Task> test_task_;
};

}  // namespace cofc
