#include "cofc/cvpo.hpp"

#include "cofc/error.hpp"
#include "cofc/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cofc {
namespace {

void check_shapes(const Eigen::MatrixXd& q_reward, const Eigen::MatrixXd& q_cost) {
  if (q_reward.rows() != q_cost.rows() || q_reward.cols() != q_cost.cols() || q_reward.size() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "Q_r and Q_c batches must share a non-empty shape");
  }
}

struct ColumnStats {
  double log_mean_exp = 0.0;
  double weighted_scaled = 0.0;  // sum_j w_j x_j
  double weighted_cost = 0.0;    // sum_j w_j Q_c
};

ColumnStats column_stats(const Eigen::Ref<const Eigen::VectorXd>& qr,
                         const Eigen::Ref<const Eigen::VectorXd>& qc, double eta, double lambda) {
  const Eigen::VectorXd x = (qr - lambda * qc) / eta;
  const double m = x.maxCoeff();
  const Eigen::VectorXd e = (x.array() - m).exp().matrix();
  const double total = e.sum();
  const double n = static_cast<double>(x.size());
  return {m + std::log(total / n), e.dot(x) / total, e.dot(qc) / total};
}

DualPoint project(DualPoint p, const DualSolverSettings& s) {
  return {std::max(p.eta, s.eta_min), std::clamp(p.lambda, 0.0, s.lambda_max)};
}

bool finite(const DualGradient& g) {
  return std::isfinite(g.value) && std::isfinite(g.d_eta) && std::isfinite(g.d_lambda);
}

}  // namespace

DualGradient dual_objective_gradient(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                                     const Eigen::MatrixXd& q_cost, double eps1, double eps2) {
  check_shapes(q_reward, q_cost);
  double lme = 0.0;
  double weighted_scaled = 0.0;
  double weighted_cost = 0.0;
  for (Eigen::Index s = 0; s < q_reward.cols(); ++s) {
    const ColumnStats cs = column_stats(q_reward.col(s), q_cost.col(s), eta, lambda);
    lme += cs.log_mean_exp;
    weighted_scaled += cs.weighted_scaled;
    weighted_cost += cs.weighted_cost;
  }
  const double n = static_cast<double>(q_reward.cols());
  lme /= n;
  weighted_scaled /= n;
  weighted_cost /= n;
  return {lambda * eps1 + eta * eps2 + eta * lme, eps2 + lme - weighted_scaled, eps1 - weighted_cost};
}

double dual_objective(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                      const Eigen::MatrixXd& q_cost, double eps1, double eps2) {
  return dual_objective_gradient(eta, lambda, q_reward, q_cost, eps1, eps2).value;
}

DualSolution solve_duals(const Eigen::MatrixXd& q_reward, const Eigen::MatrixXd& q_cost,
                         double eps1, double eps2, const DualSolverSettings& settings) {
  DualPoint x = project({settings.eta_init, settings.lambda_init}, settings);
  auto eval = [&](DualPoint p) {
    const DualGradient g = dual_objective_gradient(p.eta, p.lambda, q_reward, q_cost, eps1, eps2);
    if (!finite(g)) throw Error(ErrorCode::NonFiniteObjective, "dual objective is not finite");
    return g;
  };
  DualGradient g = eval(x);
  double step = 1.0;
  DualSolution out;
  for (std::size_t it = 0; it < settings.max_iterations; ++it) {
    out.iterations = it;
    const DualPoint unit = project({x.eta - g.d_eta, x.lambda - g.d_lambda}, settings);
    out.projected_gradient_norm = std::hypot(x.eta - unit.eta, x.lambda - unit.lambda);
    if (out.projected_gradient_norm <= settings.tolerance) {
      out.converged = true;
      break;
    }
    DualPoint next;
    DualGradient gn;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      next = project({x.eta - step * g.d_eta, x.lambda - step * g.d_lambda}, settings);
      const double de = next.eta - x.eta;
      const double dl = next.lambda - x.lambda;
      const double moved = de * de + dl * dl;
      if (moved == 0.0) break;
      gn = eval(next);
      if (gn.value <= g.value - 1e-4 / step * moved) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible at machine precision: stationary for all purposes.
      out.converged = out.projected_gradient_norm <= std::sqrt(settings.tolerance);
      break;
    }
    const double se = next.eta - x.eta;
    const double sl = next.lambda - x.lambda;
    const double ye = gn.d_eta - g.d_eta;
    const double yl = gn.d_lambda - g.d_lambda;
    const double sy = se * ye + sl * yl;
    step = sy > 0.0 ? std::clamp((se * se + sl * sl) / sy, 1e-12, 1e12) : std::min(step * 4.0, 1e12);
    x = next;
    g = gn;
  }
  out.point = x;
  out.objective = g.value;
  return out;
}

Eigen::VectorXd variational_weights(double eta, double lambda, const Eigen::VectorXd& q_reward,
                                    const Eigen::VectorXd& q_cost) {
  if (q_reward.size() != q_cost.size() || q_reward.size() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "Q_r and Q_c must share a non-empty length");
  }
  const Eigen::VectorXd x = (q_reward - lambda * q_cost) / eta;
  const Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Eigen::MatrixXd variational_weights(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                                    const Eigen::MatrixXd& q_cost) {
  check_shapes(q_reward, q_cost);
  Eigen::MatrixXd w(q_reward.rows(), q_reward.cols());
  for (Eigen::Index s = 0; s < q_reward.cols(); ++s) {
    w.col(s) = variational_weights(eta, lambda, Eigen::VectorXd(q_reward.col(s)),
                                   Eigen::VectorXd(q_cost.col(s)));
  }
  return w;
}

MStepOptions CvpoSettings::m_step_options() const {
  return {eps_kl, m_step_iterations, kl_multiplier_rate, preactivation_penalty, min_log_std};
}

void CvpoSettings::validate() const {
  common.validate();
  if (!(eps2 > 0.0 && eps_kl > 0.0)) throw Error(ErrorCode::Config, "eps2 and eps_kl must be positive");
  if (num_action_samples < 2) throw Error(ErrorCode::Config, "need at least two sampled actions");
  if (!(dual.eta_min > 0.0)) throw Error(ErrorCode::Config, "eta_min must be positive");
  if (preactivation_penalty < 0.0) throw Error(ErrorCode::Config, "preactivation_penalty must be non-negative");
  if (!(min_log_std >= kLogStdMin && min_log_std <= kLogStdMax)) {
    throw Error(ErrorCode::Config, "min_log_std must lie inside the policy's log std range");
  }
  if (e_step_batch == 0) throw Error(ErrorCode::Config, "e_step_batch must be positive");
}

VariationalWeights e_step_from_values(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                      const Eigen::MatrixXd& q_reward, const Eigen::MatrixXd& q_cost,
                                      const CvpoSettings& settings,
                                      std::optional<DualPoint> warm_start) {
  check_shapes(q_reward, q_cost);
  if (actions.rows() != q_reward.rows() || actions.cols() != q_reward.cols() ||
      states.cols() != q_reward.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "E-step samples and Q values disagree in shape");
  }
  DualSolverSettings solver = settings.dual;
  if (warm_start) {
    solver.eta_init = warm_start->eta;
    solver.lambda_init = warm_start->lambda;
  }
  VariationalWeights q;
  q.states = states;
  q.actions = actions;
  q.duals = solve_duals(q_reward, q_cost, settings.eps1, settings.eps2, solver);
  q.weights = variational_weights(q.duals.point.eta, q.duals.point.lambda, q_reward, q_cost);
  const double m = static_cast<double>(q.weights.rows());
  double cost = 0.0;
  double kl = 0.0;
  for (Eigen::Index s = 0; s < q.weights.cols(); ++s) {
    const double total = q.weights.col(s).sum();
    if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-9 || !q.weights.col(s).allFinite()) {
      throw Error(ErrorCode::DegenerateWeights, "E-step weights are degenerate");
    }
    cost += q.weights.col(s).dot(q_cost.col(s));
    for (Eigen::Index j = 0; j < q.weights.rows(); ++j) {
      const double w = q.weights(j, s);
      if (w > 0.0) kl += w * std::log(w * m);
    }
    const auto qr = q_reward.col(s);
    const auto qc = q_cost.col(s);
    const bool qr_varies = qr.maxCoeff() > qr.minCoeff();
    const bool qc_varies = qc.maxCoeff() > qc.minCoeff();
    if (qr_varies && qc_varies) {
      const Eigen::VectorXd dr = qr.array() - qr.mean();
      const Eigen::VectorXd dc = qc.array() - qc.mean();
      const double corr = dr.dot(dc) / (dr.norm() * dc.norm());
      if (std::abs(std::abs(corr) - 1.0) > 1e-9) q.strictly_convex = true;
    }
  }
  const double n = static_cast<double>(q.weights.cols());
  q.expected_cost = cost / n;
  q.kl = kl / n;
  return q;
}

VariationalWeights e_step(const Eigen::MatrixXd& states, const Critics& critics,
                          const GaussianPolicy& policy_old, const CvpoSettings& settings, Rng& rng,
                          std::optional<DualPoint> warm_start) {
  if (states.cols() == 0) throw Error(ErrorCode::EmptyBatch, "E-step needs at least one state");
  const auto m = static_cast<Eigen::Index>(settings.num_action_samples);
  const Eigen::Index n = states.cols();
  const Eigen::RowVectorXd mu = policy_old.pre_mean(states);
  const double sigma = policy_old.std();
  Eigen::MatrixXd actions(m, n);
  Eigen::MatrixXd repeated(states.rows(), m * n);
  Eigen::RowVectorXd squashed(m * n);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index j = 0; j < m; ++j) {
      actions(j, s) = mu[s] + sigma * rng.normal();
      repeated.col(s * m + j) = states.col(s);
      squashed[s * m + j] = std::tanh(actions(j, s));
    }
  }
  const Eigen::RowVectorXd qr = critics.q_reward(repeated, squashed);
  const Eigen::RowVectorXd qc = critics.q_cost(repeated, squashed);
  return e_step_from_values(states, actions, Eigen::Map<const Eigen::MatrixXd>(qr.data(), m, n),
                            Eigen::Map<const Eigen::MatrixXd>(qc.data(), m, n), settings,
                            warm_start);
}

MStepState make_m_step_state(const GaussianPolicy& policy, double learning_rate) {
  return {Adam(policy.mean_net().params().size(), learning_rate, 10.0), Adam(1, learning_rate), 0.0};
}

double weighted_log_likelihood(const GaussianPolicy& policy, const VariationalWeights& q) {
  const Eigen::RowVectorXd mu = policy.pre_mean(q.states);
  const double ls = policy.log_std();
  double total = 0.0;
  for (Eigen::Index s = 0; s < q.weights.cols(); ++s) {
    for (Eigen::Index j = 0; j < q.weights.rows(); ++j) {
      total += q.weights(j, s) * GaussianPolicy::log_density(q.actions(j, s), mu[s], ls);
    }
  }
  return total / static_cast<double>(q.weights.cols());
}

double mean_kl(const GaussianPolicy& policy_old, const GaussianPolicy& policy,
               const Eigen::MatrixXd& states) {
  const Eigen::RowVectorXd mu_old = policy_old.pre_mean(states);
  const Eigen::RowVectorXd mu = policy.pre_mean(states);
  double total = 0.0;
  for (Eigen::Index s = 0; s < states.cols(); ++s) {
    total += gaussian_kl(mu_old[s], policy_old.log_std(), mu[s], policy.log_std());
  }
  return total / static_cast<double>(states.cols());
}

MStepResult m_step_update(const VariationalWeights& q, const GaussianPolicy& policy_old,
                          GaussianPolicy& policy, MStepState& state, const MStepOptions& options) {
  const double eps_kl = options.eps_kl;
  MStepResult result;
  result.objective_before = weighted_log_likelihood(policy, q);
  const Eigen::VectorXd start_params = policy.mean_net().params();
  const double start_log_std = policy.raw_log_std();
  const Eigen::RowVectorXd mu_old = policy_old.pre_mean(q.states);
  const double var_old = std::exp(2.0 * policy_old.log_std());
  const double n = static_cast<double>(q.states.cols());

  for (std::size_t it = 0; it < options.iterations; ++it) {
    MlpD::Tape tape;
    policy.mean_net().forward(q.states, &tape);
    const Eigen::RowVectorXd mu = tape.output_preactivation.row(0);
    const double ls = policy.log_std();
    const double var = std::exp(2.0 * ls);
    const double nu = state.kl_multiplier;
    Eigen::RowVectorXd d_mu(mu.size());
    double d_ls = 0.0;
    double kl = 0.0;
    for (Eigen::Index s = 0; s < mu.size(); ++s) {
      const Eigen::ArrayXd diff = q.actions.col(s).array() - mu[s];
      const Eigen::ArrayXd w = q.weights.col(s).array();
      const double gap = mu_old[s] - mu[s];
      const double grad_ll_mu = (w * diff).sum() / var;
      const double grad_ll_ls = (w * (diff.square() / var - 1.0)).sum();
      const double grad_kl_mu = -gap / var;
      const double grad_kl_ls = 1.0 - (var_old + gap * gap) / var;
      // Descent direction of -(J - nu KL).
      d_mu[s] = -(grad_ll_mu - nu * grad_kl_mu) / n;
      d_ls += -(grad_ll_ls - nu * grad_kl_ls) / n;
      kl += gaussian_kl(mu_old[s], policy_old.log_std(), mu[s], ls);
    }
    kl /= n;
    // The Gaussian lives on the pre-squash value, so its gradient enters
    // below the tanh.
    const Eigen::MatrixXd pre =
        d_mu + (2.0 * options.preactivation_penalty / n) * tape.output_preactivation;
    const Eigen::MatrixXd none = Eigen::MatrixXd::Zero(1, mu.size());
    state.mean_optimizer.step(policy.mean_net().params(),
                              policy.mean_net().backward(tape, none, &pre).params);
    Eigen::VectorXd log_std(1);
    log_std[0] = policy.raw_log_std();
    state.log_std_optimizer.step(log_std, Eigen::VectorXd::Constant(1, d_ls));
    policy.set_log_std(std::clamp(log_std[0], options.min_log_std, kLogStdMax));
    state.kl_multiplier = std::max(0.0, nu + options.multiplier_rate * (kl - eps_kl) / eps_kl);
  }

  result.kl_unprojected = mean_kl(policy_old, policy, q.states);
  if (!std::isfinite(result.kl_unprojected)) {
    throw Error(ErrorCode::KlDivergenceBlowup, "M-step produced a non-finite KL");
  }
  result.kl = result.kl_unprojected;
  if (result.kl > 1.5 * eps_kl) {
    const Eigen::VectorXd end_params = policy.mean_net().params();
    const double end_log_std = policy.raw_log_std();
    double fraction = 1.0;
    while (result.kl > 1.5 * eps_kl && result.backtracks < 60) {
      fraction *= 0.5;
      ++result.backtracks;
      policy.mean_net().params() = start_params + fraction * (end_params - start_params);
      policy.set_log_std(start_log_std + fraction * (end_log_std - start_log_std));
      result.kl = mean_kl(policy_old, policy, q.states);
    }
  }
  if (result.kl > 10.0 * eps_kl) {
    throw Error(ErrorCode::KlDivergenceBlowup, "M-step KL exceeds ten times its radius");
  }
  result.objective_after = weighted_log_likelihood(policy, q);
  return result;
}

CvpoTrainer::CvpoTrainer(CvpoSettings settings, TaskFactory factory, std::uint64_t seed)
    : settings_(std::move(settings)), factory_(std::move(factory)), rng_(split_seed(seed, 0)) {
  settings_.validate();
  const auto& c = settings_.common;
  test_task_ = factory_();
  eps1_ = cost_limit(c.eps_T, test_task_->horizon(), c.gamma);
  settings_.eps1 = eps1_ * c.cost_scale;
  const int obs_dim = test_task_->obs_dim();
  policy_ = GaussianPolicy(obs_dim, c.policy_hidden, c.initial_log_std);
  policy_.initialize(rng_);
  critics_ = Critics(obs_dim, c.critic);
  critics_.initialize(rng_);
  m_state_ = make_m_step_state(policy_, c.policy_learning_rate);
  duals_ = {settings_.dual.eta_init, settings_.dual.lambda_init};
  for (std::size_t w = 0; w < c.num_envs; ++w) workers_.emplace_back(factory_(), split_seed(seed, w + 1));
}

TrainingResult CvpoTrainer::train(const TrainHooks& hooks) {
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
    }

    if (buffer.size() >= std::max(c.batch_size, settings_.e_step_batch)) {
      for (std::size_t u = 0; u < c.updates_per_epoch; ++u) {
        const Batch batch = buffer.sample(c.batch_size, rng_);
        critic_td_update(critics_, batch, policy_, c.gamma, NextAction::SquashedSample, rng_);
      }
      for (std::size_t k = 0; k < settings_.policy_updates_per_epoch; ++k) {
        const Batch states = buffer.sample(settings_.e_step_batch, rng_);
        const GaussianPolicy old = policy_;
        const VariationalWeights q = e_step(states.s, critics_, old, settings_, rng_, duals_);
        duals_ = q.duals.point;
        m_step_update(q, old, policy_, m_state_, settings_.m_step_options());
      }
    }

    const EpisodeSummary test = evaluate_policy(*test_task_, policy_);
    EpochRecord record{epoch,       last_reward, last_cost,  duals_.lambda, test.fuel_g,
                       test.final_soc, test.reward, test.cost, duals_.eta,   duals_.lambda};
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
