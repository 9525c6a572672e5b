#include "cofc/critics.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <cmath>

namespace cofc {
namespace {

std::vector<int> critic_sizes(int obs_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{obs_dim + 1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

double mse_step(MlpD& net, Adam& optimizer, const Eigen::MatrixXd& inputs,
                const Eigen::RowVectorXd& targets) {
  MlpD::Tape tape;
  const Eigen::RowVectorXd q = net.forward(inputs, &tape).row(0);
  const Eigen::RowVectorXd err = q - targets;
  const double n = static_cast<double>(err.size());
  const Eigen::MatrixXd upstream = (2.0 / n) * err;
  optimizer.step(net.params(), net.backward(tape, upstream).params);
  return err.squaredNorm() / n;
}

}  // namespace

Critics::Critics(int obs_dim, const CriticSettings& settings)
    : reward(critic_sizes(obs_dim, settings.hidden)),
      cost(critic_sizes(obs_dim, settings.hidden)),
      reward_target(critic_sizes(obs_dim, settings.hidden)),
      cost_target(critic_sizes(obs_dim, settings.hidden)),
      reward_optimizer(reward.params().size(), settings.learning_rate, settings.max_grad_norm),
      cost_optimizer(cost.params().size(), settings.learning_rate, settings.max_grad_norm),
      polyak(settings.polyak) {}

void Critics::initialize(Rng& rng) {
  reward.initialize(rng, 3e-3);
  cost.initialize(rng, 3e-3);
  reward_target.params() = reward.params();
  cost_target.params() = cost.params();
}

Eigen::MatrixXd Critics::stack_inputs(const Eigen::MatrixXd& observations,
                                      const Eigen::RowVectorXd& actions) {
  if (observations.cols() != actions.size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation and action counts differ");
  }
  Eigen::MatrixXd x(observations.rows() + 1, observations.cols());
  x.topRows(observations.rows()) = observations;
  x.bottomRows(1) = actions;
  return x;
}

Eigen::RowVectorXd Critics::q_reward(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const {
  return reward.forward(stack_inputs(s, a)).row(0);
}
Eigen::RowVectorXd Critics::q_cost(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& a) const {
  return cost.forward(stack_inputs(s, a)).row(0);
}
Eigen::RowVectorXd Critics::target_q_reward(const Eigen::MatrixXd& s,
                                            const Eigen::RowVectorXd& a) const {
  return reward_target.forward(stack_inputs(s, a)).row(0);
}
Eigen::RowVectorXd Critics::target_q_cost(const Eigen::MatrixXd& s,
                                          const Eigen::RowVectorXd& a) const {
  return cost_target.forward(stack_inputs(s, a)).row(0);
}

Critics::ActionSensitivity Critics::action_sensitivity(const Eigen::MatrixXd& s,
                                                       const Eigen::RowVectorXd& a) const {
  const Eigen::MatrixXd x = stack_inputs(s, a);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, x.cols());
  ActionSensitivity out;
  MlpD::Tape tape;
  out.q_reward = reward.forward(x, &tape).row(0);
  out.dq_reward_da = reward.backward(tape, ones).input.bottomRows(1);
  out.q_cost = cost.forward(x, &tape).row(0);
  out.dq_cost_da = cost.backward(tape, ones).input.bottomRows(1);
  return out;
}

void Critics::update_targets() {
  polyak_update(reward, reward_target, polyak);
  polyak_update(cost, cost_target, polyak);
}

TdTargets td_targets(const Critics& critics, const Batch& batch, const GaussianPolicy& policy,
                     double gamma, NextAction next, Rng& rng) {
  if (batch.size() == 0) throw Error(ErrorCode::EmptyBatch, "empty batch");
  Eigen::RowVectorXd next_actions;
  if (next == NextAction::SquashedSample) {
    next_actions = policy.pre_mean(batch.s_next);
    for (Eigen::Index i = 0; i < next_actions.size(); ++i) {
      next_actions[i] = std::tanh(next_actions[i] + policy.std() * rng.normal());
    }
  } else {
    next_actions = policy.mean(batch.s_next);
    if (next == NextAction::Sample) {
      for (Eigen::Index i = 0; i < next_actions.size(); ++i) {
        next_actions[i] = std::clamp(next_actions[i] + policy.std() * rng.normal(), -1.0, 1.0);
      }
    }
  }
  const Eigen::RowVectorXd continuation =
      gamma * (Eigen::RowVectorXd::Ones(batch.size()) - batch.done);
  TdTargets y;
  y.reward = batch.r;
  y.cost = batch.c;
  if (gamma != 0.0) {
    y.reward += continuation.cwiseProduct(critics.target_q_reward(batch.s_next, next_actions));
    y.cost += continuation.cwiseProduct(critics.target_q_cost(batch.s_next, next_actions));
  }
  return y;
}

TdLosses critic_td_update(Critics& critics, const Batch& batch, const GaussianPolicy& policy,
                          double gamma, NextAction next, Rng& rng) {
  const TdTargets y = td_targets(critics, batch, policy, gamma, next, rng);
  const Eigen::MatrixXd x = Critics::stack_inputs(batch.s, batch.a);
  TdLosses losses;
  losses.reward = mse_step(critics.reward, critics.reward_optimizer, x, y.reward);
  losses.cost = mse_step(critics.cost, critics.cost_optimizer, x, y.cost);
  critics.update_targets();
  return losses;
}

}  // namespace cofc
