#pragma once

#include "cofc/critics.hpp"
#include "cofc/policy.hpp"
#include "cofc/replay_buffer.hpp"
#include "cofc/rng.hpp"
#include "cofc/task.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace cofc {

/// Settings shared by both constrained trainers.
struct TrainSettings {
  std::size_t epochs = 150;
  std::size_t steps_per_epoch = 800;  // summed over all workers
  std::size_t num_envs = 4;
  std::size_t num_threads = 0;        // 0: one per worker, capped by the hardware
  std::size_t start_steps = 800;      // uniformly random actions before this many steps
  std::size_t batch_size = 128;
  std::size_t updates_per_epoch = 200;
  std::size_t replay_capacity = 16000;
  double gamma = 0.99;
  double eps_T = 1.5;                 // undiscounted per-episode cost limit
  double reward_scale = 1.0;
  double cost_scale = 20.0;           // multiplies the cost seen by Q_c
  std::vector<int> policy_hidden{64, 64};
  double policy_learning_rate = 1e-3;
  double initial_log_std = -1.6;
  /// A test episode is acceptable when its cost is within eps_T and, if
  /// target_soc is set, its final SOC lies within final_soc_tolerance of it.
  double target_soc = std::numeric_limits<double>::quiet_NaN();
  double final_soc_tolerance = 0.03;
  CriticSettings critic;

  void validate() const;
};

struct EpisodeSummary {
  double reward = 0.0;  // undiscounted
  double cost = 0.0;    // undiscounted
  double fuel_g = std::numeric_limits<double>::quiet_NaN();
  double final_soc = std::numeric_limits<double>::quiet_NaN();
  std::size_t steps = 0;
};

/// One row of the training trace.
struct EpochRecord {
  std::size_t epoch = 0;
  double mean_reward = 0.0;  // mean undiscounted return of training episodes
  double mean_cost = 0.0;
  double lambda = 0.0;
  double fuel_g = 0.0;       // deterministic test episode
  double final_soc = 0.0;
  double test_reward = 0.0;
  double test_cost = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double lambda_cvpo = std::numeric_limits<double>::quiet_NaN();
};

void write_trace(const std::vector<EpochRecord>& trace, bool cvpo_columns, std::ostream& out);

bool acceptable(const EpisodeSummary& summary, const TrainSettings& settings);

/// Acceptable episodes first, then reward; among the rest the smaller
/// relative miss (cost over eps_T plus final SOC outside its band) wins.
bool better_policy(const EpisodeSummary& candidate, const EpisodeSummary& incumbent,
                   const TrainSettings& settings);

/// Runs one deterministic (mean-action) episode.
EpisodeSummary evaluate_policy(Task& task, const GaussianPolicy& policy);

/// Holds one task instance and its own random stream; episodes continue
/// across collection calls.
class RolloutWorker {
 public:
  RolloutWorker(std::unique_ptr<Task> task, std::uint64_t seed);

  /// Policy samples the Gaussian around the mean; SquashedNoise perturbs the
  /// mean before its tanh, so a saturated mean explores only inward.
  enum class Mode { Uniform, Policy, SquashedNoise };

  /// Collects `steps` samples. Finished episodes are appended to `finished`.
  std::vector<Sample> collect(const GaussianPolicy& policy, std::size_t steps, Mode mode,
                              std::vector<EpisodeSummary>& finished);

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  std::unique_ptr<Task> task_;
  Rng rng_;
  Eigen::VectorXd obs_;
  EpisodeSummary current_;
};

struct RolloutBatch {
  std::vector<Sample> samples;  // worker order, then step order
  std::vector<EpisodeSummary> episodes;
};

/// Fans the collection out over `threads` threads; results are merged in
/// worker order so the outcome does not depend on scheduling.
RolloutBatch collect_parallel(std::vector<RolloutWorker>& workers, const GaussianPolicy& policy,
                              std::size_t steps_per_worker, RolloutWorker::Mode mode,
                              std::size_t threads);

struct TrainingResult {
  std::vector<EpochRecord> trace;
  GaussianPolicy best_policy;
  EpisodeSummary best_summary;
  bool best_feasible = false;
  std::size_t best_epoch = 0;
  GaussianPolicy final_policy;
};

/// Hooks the caller can use for persistence and cancellation.
struct TrainHooks {
  /// Called after every epoch; `improved` is true when the best policy changed.
  std::function<void(const EpochRecord&, bool improved)> on_epoch;
  const std::atomic<bool>* stop = nullptr;
};

}  // namespace cofc
