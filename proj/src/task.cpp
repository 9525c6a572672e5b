#include "cofc/task.hpp"

#include <algorithm>

namespace cofc {

HevTask::HevTask(HevEnv env, bool keep_log) : env_(std::move(env)), keep_log_(keep_log) {}

Eigen::VectorXd HevTask::features(const Observation& obs) const {
  const SocCorridor& c = env_.corridor();
  Eigen::VectorXd x(3);
  x << (obs.soc - c.balance) / (0.5 * (c.high - c.low)), obs.velocity / kVelocityScale, obs.acceleration / kAccelScale;
  return x;
}

double HevTask::engine_power(double normalized_action) const {
  const double u = std::clamp(normalized_action, -1.0, 1.0);
  return 0.5 * (u + 1.0) * env_.params().engine.max_power;
}

double HevTask::normalized_action(double engine_power) const {
  return 2.0 * engine_power / env_.params().engine.max_power - 1.0;
}

Eigen::VectorXd HevTask::reset() {
  fuel_ = 0.0;
  log_.clear();
  transitions_.clear();
  const Observation obs = env_.reset();
  soc_ = obs.soc;
  return features(obs);
}

TaskStep HevTask::step(double normalized_action) {
  const Transition tr = env_.step(engine_power(normalized_action));
  fuel_ -= tr.r;
  soc_ = tr.s_next.soc;
  if (keep_log_) {
    log_.push_back(env_.last_row());
    transitions_.push_back(tr);
  }
  return {features(tr.s_next), tr.r, tr.c, tr.done};
}

TaskMetrics HevTask::metrics() const { return {fuel_, soc_}; }

TaskStep BanditTask::step(double normalized_action) {
  const double a = std::clamp(normalized_action, -1.0, 1.0);
  return {Eigen::VectorXd::Zero(1), -a * a, std::max(threshold_ - a, 0.0), true};
}

}  // namespace cofc
