#include "cofc/lagrangian.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <cmath>

namespace cofc {

double cost_limit(double eps_T, std::size_t horizon, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidGamma, "gamma must lie in (0, 1]");
  if (eps_T < 0.0) throw Error(ErrorCode::Config, "eps_T must be non-negative");
  if (horizon < 1) throw Error(ErrorCode::Config, "episode length must be at least 1");
  if (gamma == 1.0) return eps_T;
  const double t = static_cast<double>(horizon);
  return eps_T * (1.0 - std::pow(gamma, t)) / (t * (1.0 - gamma));
}

double CostBudget::discounted(double episode_cost) const {
  return cost_limit(episode_cost, horizon, gamma);
}

double pid_dual_update(PidDualState& state, double measured_cost, double eps1) {
  const double error = measured_cost - eps1;
  const double derivative = state.has_prev ? std::max(measured_cost - state.prev_cost, 0.0) : 0.0;
  state.integral = std::max(state.integral + error, 0.0);
  state.lambda = std::max(
      state.gains.kp * error + state.gains.ki * state.integral + state.gains.kd * derivative, 0.0);
  state.prev_cost = measured_cost;
  state.has_prev = true;
  return state.lambda;
}

double lagrangian_actor_loss(const Eigen::RowVectorXd& q_reward, const Eigen::RowVectorXd& q_cost,
                             double lambda) {
  if (q_reward.size() != q_cost.size() || q_reward.size() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "critic batches must be equal-length and non-empty");
  }
  if (lambda < 0.0) throw Error(ErrorCode::Config, "lambda must be non-negative");
  return -(q_reward - lambda * q_cost).mean() / (1.0 + lambda);
}

void LagrangianSettings::validate() const {
  common.validate();
  if (pid.kp < 0.0 || pid.ki < 0.0 || pid.kd < 0.0) {
    throw Error(ErrorCode::Config, "PID gains must be non-negative");
  }
  if (preactivation_penalty < 0.0) throw Error(ErrorCode::Config, "preactivation_penalty must be non-negative");
  if (policy_delay == 0) throw Error(ErrorCode::Config, "policy_delay must be positive");
}

LagrangianTrainer::LagrangianTrainer(LagrangianSettings settings, TaskFactory factory,
                                     std::uint64_t seed)
    : settings_(std::move(settings)), factory_(std::move(factory)), rng_(split_seed(seed, 0)) {
  settings_.validate();
  const auto& c = settings_.common;
  test_task_ = factory_();
  budget_ = {c.eps_T, test_task_->horizon(), c.gamma};
  const int obs_dim = test_task_->obs_dim();
  policy_ = GaussianPolicy(obs_dim, c.policy_hidden, c.initial_log_std);
  policy_.initialize(rng_);
  policy_optimizer_ = Adam(policy_.mean_net().params().size(), c.policy_learning_rate, 10.0);
  critics_ = Critics(obs_dim, c.critic);
  critics_.initialize(rng_);
  dual_.gains = settings_.pid;
  for (std::size_t w = 0; w < c.num_envs; ++w) workers_.emplace_back(factory_(), split_seed(seed, w + 1));
}

double LagrangianTrainer::actor_step(const Eigen::MatrixXd& states) {
  MlpD::Tape tape;
  const Eigen::RowVectorXd mu = policy_.mean_net().forward(states, &tape).row(0);
  const auto q = critics_.action_sensitivity(states, mu);
  const double lambda = dual_.lambda;
  const double n = static_cast<double>(states.cols());
  const double beta = settings_.preactivation_penalty;
  const double loss = lagrangian_actor_loss(q.q_reward, q.q_cost, lambda) +
                      beta * tape.output_preactivation.squaredNorm() / n;
  const Eigen::MatrixXd upstream = -(q.dq_reward_da - lambda * q.dq_cost_da) / (n * (1.0 + lambda));
  const Eigen::MatrixXd pre = (2.0 * beta / n) * tape.output_preactivation;
  policy_optimizer_.step(policy_.mean_net().params(),
                         policy_.mean_net().backward(tape, upstream, &pre).params);
  return loss;
}

double LagrangianTrainer::exploration_log_std(std::size_t epoch) const {
  const double start = settings_.noise_log_std;
  if (settings_.noise_decay_epochs == 0) return start;
  const double f = std::min(1.0, static_cast<double>(epoch - 1) / static_cast<double>(settings_.noise_decay_epochs));
  return start + f * (settings_.final_noise_log_std - start);
}

TrainingResult LagrangianTrainer::train(const TrainHooks& hooks) {
  const auto& c = settings_.common;
  const std::size_t per_worker = (c.steps_per_epoch + c.num_envs - 1) / c.num_envs;
  ReplayBuffer buffer(c.replay_capacity);
  TrainingResult result;
  bool have_best = false;
  std::size_t total_steps = 0;
  double last_reward = std::nan("");
  double last_cost = std::nan("");

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    if (hooks.stop && hooks.stop->load()) break;
    policy_.set_log_std(exploration_log_std(epoch));
    const auto mode = total_steps < c.start_steps ? RolloutWorker::Mode::Uniform
                                                  : RolloutWorker::Mode::SquashedNoise;
    RolloutBatch rollout = collect_parallel(workers_, policy_, per_worker, mode, c.num_threads);
    total_steps += rollout.samples.size();
    for (auto& s : rollout.samples) {
      s.r *= c.reward_scale;
      s.c *= c.cost_scale;
      buffer.push(std::move(s));
    }

    if (!rollout.episodes.empty()) {
      double reward = 0.0;
      double cost = 0.0;
      for (const auto& ep : rollout.episodes) {
        reward += ep.reward;
        cost += ep.cost;
      }
      last_reward = reward / static_cast<double>(rollout.episodes.size());
      last_cost = cost / static_cast<double>(rollout.episodes.size());
      // Random warm-up episodes say nothing about the policy.
      if (mode != RolloutWorker::Mode::Uniform) {
        pid_dual_update(dual_, budget_.discounted(last_cost), budget_.eps1());
      }
    }

    if (buffer.size() >= c.batch_size) {
      for (std::size_t u = 0; u < c.updates_per_epoch; ++u) {
        const Batch batch = buffer.sample(c.batch_size, rng_);
        critic_td_update(critics_, batch, policy_, c.gamma, NextAction::Mean, rng_);
        if (u % settings_.policy_delay == 0) actor_step(batch.s);
      }
    }

    const EpisodeSummary test = evaluate_policy(*test_task_, policy_);
    EpochRecord record{epoch, last_reward, last_cost, dual_.lambda, test.fuel_g, test.final_soc,
                       test.reward, test.cost};
    result.trace.push_back(record);
    const bool improved = !have_best || better_policy(test, result.best_summary, c);
    if (improved) {
      have_best = true;
      result.best_policy = policy_;
      result.best_summary = test;
      result.best_epoch = epoch;
      result.best_feasible = acceptable(test, c);
    }
    if (hooks.on_epoch) hooks.on_epoch(record, improved);
  }
  result.final_policy = policy_;
  return result;
}

}  // namespace cofc
