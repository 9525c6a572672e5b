#pragma once

#include "cofc/env.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <memory>
#include <vector>

namespace cofc {

/// What a learner sees after one step.
struct TaskStep {
  Eigen::VectorXd s_next;
  double r = 0.0;
  double c = 0.0;
  bool done = false;
};

struct TaskMetrics {
  double fuel_g = std::numeric_limits<double>::quiet_NaN();
  double final_soc = std::numeric_limits<double>::quiet_NaN();
};

/// Learner-facing episodic task with a scalar action normalized to [-1, 1].
class Task {
 public:
  virtual ~Task() = default;
  virtual int obs_dim() const = 0;
  virtual Eigen::VectorXd reset() = 0;
  virtual TaskStep step(double normalized_action) = 0;
  virtual std::size_t horizon() const = 0;
  /// Domain metrics of the episode in progress (or just finished).
  virtual TaskMetrics metrics() const { return {}; }
};

using TaskFactory = std::function<std::unique_ptr<Task>()>;

/// Adapts HevEnv. Observations are SOC measured from the balance point in
/// units of the corridor half-width, v/33 m/s and a/3 m/s^2; the normalized
/// action maps linearly onto [0, max engine power].
class HevTask : public Task {
 public:
  static constexpr double kVelocityScale = 33.0;
  static constexpr double kAccelScale = 3.0;

  explicit HevTask(HevEnv env, bool keep_log = false);

  int obs_dim() const override { return 3; }
  Eigen::VectorXd reset() override;
  TaskStep step(double normalized_action) override;
  std::size_t horizon() const override { return env_.corridor().horizon; }
  TaskMetrics metrics() const override;

  Eigen::VectorXd features(const Observation& obs) const;
  double engine_power(double normalized_action) const;
  double normalized_action(double engine_power) const;

  const HevEnv& env() const { return env_; }
  const std::vector<EpisodeLogRow>& log() const { return log_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

 private:
  HevEnv env_;
  bool keep_log_;
  double fuel_ = 0.0;
  double soc_ = 0.0;
  std::vector<EpisodeLogRow> log_;
  std::vector<Transition> transitions_;
};

/// Single-state, single-step constrained bandit: reward -a^2 and cost
/// (threshold - a)_+ with the action taken directly in [-1, 1].
class BanditTask : public Task {
 public:
  explicit BanditTask(double threshold = 0.5) : threshold_(threshold) {}

  int obs_dim() const override { return 1; }
  Eigen::VectorXd reset() override { return Eigen::VectorXd::Zero(1); }
  TaskStep step(double normalized_action) override;
  std::size_t horizon() const override { return 1; }

 private:
  double threshold_;
};

}  // namespace cofc
