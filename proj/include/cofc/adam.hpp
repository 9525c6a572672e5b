#pragma once

#include <Eigen/Core>

#include <cmath>

namespace cofc {

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long steps = 0;
};

/// Adam with optional global-norm gradient clipping. Descends `grad`.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double learning_rate, double max_grad_norm = 0.0)
      : learning_rate_(learning_rate), max_grad_norm_(max_grad_norm) {
    state_.first_moment = Eigen::VectorXd::Zero(size);
    state_.second_moment = Eigen::VectorXd::Zero(size);
  }

  void step(Eigen::VectorXd& params, Eigen::VectorXd grad) {
    if (max_grad_norm_ > 0.0) {
      const double norm = grad.norm();
      if (norm > max_grad_norm_) grad *= max_grad_norm_ / norm;
    }
    ++state_.steps;
    state_.first_moment = kBeta1 * state_.first_moment + (1.0 - kBeta1) * grad;
    state_.second_moment = kBeta2 * state_.second_moment + (1.0 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state_.steps));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state_.steps));
    params.array() -= learning_rate_ * (state_.first_moment.array() / c1) /
                      ((state_.second_moment.array() / c2).sqrt() + kEpsilon);
  }

  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr) { learning_rate_ = lr; }
  double max_grad_norm() const { return max_grad_norm_; }
  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  double learning_rate_ = 1e-3;
  double max_grad_norm_ = 0.0;
  AdamState state_;
};

}  // namespace cofc
