#pragma once

#include "cofc/adam.hpp"
#include "cofc/critics.hpp"
#include "cofc/policy.hpp"
#include "cofc/training.hpp"

#include <Eigen/Core>

#include <optional>

namespace cofc {

// Q matrices used by the E-step hold one column per state and one row per
// sampled action (M x N).

struct DualSolverSettings {
  double eta_min = 1e-6;
  double lambda_max = 50.0;
  double eta_init = 1.0;
  double lambda_init = 0.0;
  std::size_t max_iterations = 2000;
  double tolerance = 1e-8;  // on the projected-gradient norm
};

struct DualPoint {
  double eta = 1.0;
  double lambda = 0.0;
};

/// g(eta, lambda) = lambda eps1 + eta eps2
///                  + eta mean_s log mean_j exp((Q_r - lambda Q_c) / eta).
double dual_objective(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                      const Eigen::MatrixXd& q_cost, double eps1, double eps2);

struct DualGradient {
  double value = 0.0;
  double d_eta = 0.0;
  double d_lambda = 0.0;
};

DualGradient dual_objective_gradient(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                                     const Eigen::MatrixXd& q_cost, double eps1, double eps2);

struct DualSolution {
  DualPoint point;
  double objective = 0.0;
  double projected_gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Projected gradient descent with Barzilai-Borwein steps and backtracking
/// over [eta_min, inf) x [0, lambda_max].
DualSolution solve_duals(const Eigen::MatrixXd& q_reward, const Eigen::MatrixXd& q_cost,
                         double eps1, double eps2, const DualSolverSettings& settings);

/// Softmax of (Q_r - lambda Q_c) / eta over the sampled actions of one state.
Eigen::VectorXd variational_weights(double eta, double lambda, const Eigen::VectorXd& q_reward,
                                    const Eigen::VectorXd& q_cost);
/// Column-wise weights for an M x N batch.
Eigen::MatrixXd variational_weights(double eta, double lambda, const Eigen::MatrixXd& q_reward,
                                    const Eigen::MatrixXd& q_cost);

struct MStepOptions {
  double eps_kl = 0.01;
  std::size_t iterations = 5;
  double multiplier_rate = 1.0;
  double preactivation_penalty = 0.0;
  double min_log_std = kLogStdMin;
};

struct CvpoSettings {
  TrainSettings common;
  double eps1 = 0.0;     // E-step cost threshold on Q_c; the trainer derives it from eps_T
  double eps2 = 0.1;     // E-step KL radius
  double eps_kl = 0.01;  // M-step KL radius
  std::size_t num_action_samples = 32;  // M
  std::size_t e_step_batch = 64;        // states per E-step
  std::size_t policy_updates_per_epoch = 20;
  std::size_t m_step_iterations = 5;
  double kl_multiplier_rate = 1.0;
  /// Quadratic penalty on the mean head's pre-tanh value in the M-step.
  double preactivation_penalty = 1e-2;
  /// Floor on the learned log std; keeps the E-step sampling a spread of
  /// actions.
  double min_log_std = -2.0;

  DualSolverSettings dual;

  MStepOptions m_step_options() const;

  void validate() const;
};

struct VariationalWeights {
  Eigen::MatrixXd states;   // obs_dim x N
  Eigen::MatrixXd actions;  // M x N, pre-squash samples z; the critics saw tanh(z)
  Eigen::MatrixXd weights;  // M x N, columns sum to one
  DualSolution duals;
  double expected_cost = 0.0;  // mean_s E_q[Q_c]
  double kl = 0.0;             // mean_s KL(q || pi_old) over the samples
  /// Non-constant, non-proportional Q_r/Q_c in some state: the dual then has
  /// a unique minimizer. Diagnostic only.
  bool strictly_convex = false;
};

/// The policy is read as a Gaussian over the pre-squash action (see
/// GaussianPolicy::pre_mean); likelihoods and KLs below are taken there,
/// where they equal those of the squashed actions.
VariationalWeights e_step(const Eigen::MatrixXd& states, const Critics& critics,
                          const GaussianPolicy& policy_old, const CvpoSettings& settings,
                          Rng& rng, std::optional<DualPoint> warm_start = std::nullopt);

/// E-step on precomputed samples and Q values.
VariationalWeights e_step_from_values(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                      const Eigen::MatrixXd& q_reward, const Eigen::MatrixXd& q_cost,
                                      const CvpoSettings& settings,
                                      std::optional<DualPoint> warm_start = std::nullopt);

struct MStepState {
  Adam mean_optimizer;
  Adam log_std_optimizer;
  double kl_multiplier = 0.0;
};

MStepState make_m_step_state(const GaussianPolicy& policy, double learning_rate);

struct MStepResult {
  double objective_before = 0.0;  // weighted log-likelihood per state
  double objective_after = 0.0;
  double kl = 0.0;                // accepted mean KL(pi_old || pi_new)
  double kl_unprojected = 0.0;
  std::size_t backtracks = 0;
};

/// Weighted mean log-likelihood of the E-step samples under `policy`.
double weighted_log_likelihood(const GaussianPolicy& policy, const VariationalWeights& q);
double mean_kl(const GaussianPolicy& policy_old, const GaussianPolicy& policy,
               const Eigen::MatrixXd& states);

/// Weighted maximum likelihood under mean KL(pi_old || pi) <= eps_kl via
/// alternating ascent on the parameters and on a KL multiplier. Accepted
/// steps satisfy KL <= 1.5 eps_kl (backtracking toward pi_old otherwise).
MStepResult m_step_update(const VariationalWeights& q, const GaussianPolicy& policy_old,
                          GaussianPolicy& policy, MStepState& state, const MStepOptions& options);

/// Constrained variational policy optimization trainer.
class CvpoTrainer {
 public:
  CvpoTrainer(CvpoSettings settings, TaskFactory factory, std::uint64_t seed);

  TrainingResult train(const TrainHooks& hooks = {});

  const GaussianPolicy& policy() const { return policy_; }
  GaussianPolicy& policy() { return policy_; }
  const Critics& critics() const { return critics_; }
  Critics& critics() { return critics_; }
  MStepState& m_step_state() { return m_state_; }
  const MStepState& m_step_state() const { return m_state_; }
  DualPoint duals() const { return duals_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  const CvpoSettings& settings() const { return settings_; }
  double eps1() const { return eps1_; }

 private:
  CvpoSettings settings_;
  TaskFactory factory_;
  double eps1_ = 0.0;
  Rng rng_;
  GaussianPolicy policy_;
  Critics critics_;
  MStepState m_state_;
  DualPoint duals_;
  std::vector<RolloutWorker> workers_;
  std::unique_ptr<Task> test_task_;
};

}  // namespace cofc
