#pragma once

#include "cofc/rng.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace cofc {

/// Learner-side transition: observations are normalized feature vectors and
/// the action is the normalized value actually applied, in [-1, 1].
struct Sample {
  Eigen::VectorXd s;
  double a = 0.0;
  Eigen::VectorXd s_next;
  double r = 0.0;
  double c = 0.0;
  bool done = false;
};

/// Column-stacked minibatch.
struct Batch {
  Eigen::MatrixXd s;        // obs_dim x n
  Eigen::RowVectorXd a;     // 1 x n
  Eigen::MatrixXd s_next;   // obs_dim x n
  Eigen::RowVectorXd r;
  Eigen::RowVectorXd c;
  Eigen::RowVectorXd done;  // 1.0 where terminal

  Eigen::Index size() const { return a.size(); }
};

Batch make_batch(const std::vector<Sample>& samples);

/// Fixed-capacity FIFO ring of samples with uniform minibatch sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Sample sample);
  /// Draws `batch_size` distinct entries uniformly at random.
  Batch sample(std::size_t batch_size, Rng& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Entry `i` in insertion order (0 is the oldest retained).
  const Sample& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
  std::vector<Sample> data_;
};

}  // namespace cofc
