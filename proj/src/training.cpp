#include "cofc/training.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

namespace cofc {

void TrainSettings::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, what);
  };
  require(epochs > 0, "epochs must be positive");
  require(num_envs > 0, "num_envs must be positive");
  require(steps_per_epoch >= num_envs, "steps_per_epoch must be at least num_envs");
  require(batch_size > 0, "batch_size must be positive");
  require(replay_capacity >= batch_size, "replay_capacity must hold a batch");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidGamma, "gamma must lie in (0, 1]");
  require(eps_T >= 0.0, "eps_T must be non-negative");
  require(reward_scale > 0.0 && cost_scale > 0.0, "reward/cost scales must be positive");
  require(policy_learning_rate > 0.0 && critic.learning_rate > 0.0, "learning rates must be positive");
  require(final_soc_tolerance > 0.0, "final_soc_tolerance must be positive");
  require(critic.polyak >= 0.0 && critic.polyak <= 1.0, "polyak must lie in [0, 1]");
}

void write_trace(const std::vector<EpochRecord>& trace, bool cvpo_columns, std::ostream& out) {
  out << "epoch,mean_Jr,mean_Jc,lambda,fuel_g,final_soc";
  if (cvpo_columns) out << ",eta,lambda_cvpo";
  out << '\n' << std::setprecision(10);
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.mean_reward << ',' << r.mean_cost << ',' << r.lambda << ','
        << r.fuel_g << ',' << r.final_soc;
    if (cvpo_columns) out << ',' << r.eta << ',' << r.lambda_cvpo;
    out << '\n';
  }
}

namespace {

bool checks_soc(const EpisodeSummary& s, const TrainSettings& settings) {
  return std::isfinite(settings.target_soc) && std::isfinite(s.final_soc);
}

double miss(const EpisodeSummary& s, const TrainSettings& settings) {
  double m = std::max(s.cost - settings.eps_T, 0.0) / std::max(settings.eps_T, 1e-12);
  if (checks_soc(s, settings)) {
    const double off = std::abs(s.final_soc - settings.target_soc) - settings.final_soc_tolerance;
    m += std::max(off, 0.0) / std::max(settings.final_soc_tolerance, 1e-12);
  }
  return m;
}

}  // namespace

bool acceptable(const EpisodeSummary& summary, const TrainSettings& settings) {
  if (summary.cost > settings.eps_T) return false;
  return !checks_soc(summary, settings) ||
         std::abs(summary.final_soc - settings.target_soc) <= settings.final_soc_tolerance;
}

bool better_policy(const EpisodeSummary& candidate, const EpisodeSummary& incumbent,
                   const TrainSettings& settings) {
  const bool cand_ok = acceptable(candidate, settings);
  const bool inc_ok = acceptable(incumbent, settings);
  if (cand_ok != inc_ok) return cand_ok;
  if (cand_ok) return candidate.reward > incumbent.reward;
  return miss(candidate, settings) < miss(incumbent, settings);
}

EpisodeSummary evaluate_policy(Task& task, const GaussianPolicy& policy) {
  EpisodeSummary summary;
  Eigen::VectorXd obs = task.reset();
  for (std::size_t k = 0; k < task.horizon(); ++k) {
    const TaskStep step = task.step(policy.mean(obs));
    summary.reward += step.r;
    summary.cost += step.c;
    ++summary.steps;
    obs = step.s_next;
    if (step.done) break;
  }
  const TaskMetrics m = task.metrics();
  summary.fuel_g = m.fuel_g;
  summary.final_soc = m.final_soc;
  return summary;
}

RolloutWorker::RolloutWorker(std::unique_ptr<Task> task, std::uint64_t seed)
    : task_(std::move(task)), rng_(seed) {
  obs_ = task_->reset();
}

std::vector<Sample> RolloutWorker::collect(const GaussianPolicy& policy, std::size_t steps,
                                           Mode mode, std::vector<EpisodeSummary>& finished) {
  std::vector<Sample> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    double action = 0.0;
    switch (mode) {
      case Mode::Uniform: action = rng_.uniform(-1.0, 1.0); break;
      case Mode::Policy: action = std::clamp(policy.sample(obs_, rng_), -1.0, 1.0); break;
      case Mode::SquashedNoise: action = policy.squashed_sample(obs_, rng_); break;
    }
    TaskStep step = task_->step(action);
    current_.reward += step.r;
    current_.cost += step.c;
    ++current_.steps;
    out.push_back({obs_, action, step.s_next, step.r, step.c, step.done});
    if (step.done) {
      const TaskMetrics m = task_->metrics();
      current_.fuel_g = m.fuel_g;
      current_.final_soc = m.final_soc;
      finished.push_back(current_);
      current_ = {};
      obs_ = task_->reset();
    } else {
      obs_ = std::move(step.s_next);
    }
  }
  return out;
}

RolloutBatch collect_parallel(std::vector<RolloutWorker>& workers, const GaussianPolicy& policy,
                              std::size_t steps_per_worker, RolloutWorker::Mode mode,
                              std::size_t threads) {
  const std::size_t n = workers.size();
  std::vector<std::vector<Sample>> samples(n);
  std::vector<std::vector<EpisodeSummary>> episodes(n);
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t pool = std::clamp<std::size_t>(threads == 0 ? hw : threads, 1, n);
  std::vector<std::exception_ptr> failures(n);
  auto run_range = [&](std::size_t first) {
    for (std::size_t w = first; w < n; w += pool) {
      try {
        samples[w] = workers[w].collect(policy, steps_per_worker, mode, episodes[w]);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    }
  };
  if (pool == 1) {
    run_range(0);
  } else {
    std::vector<std::jthread> group;
    for (std::size_t t = 0; t < pool; ++t) group.emplace_back(run_range, t);
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  RolloutBatch batch;
  for (std::size_t w = 0; w < n; ++w) {
    batch.samples.insert(batch.samples.end(), std::make_move_iterator(samples[w].begin()),
                         std::make_move_iterator(samples[w].end()));
    batch.episodes.insert(batch.episodes.end(), episodes[w].begin(), episodes[w].end());
  }
  return batch;
}

}  // namespace cofc
