#include "cofc/replay_buffer.hpp"

#include "cofc/error.hpp"

#include <algorithm>

namespace cofc {

Batch make_batch(const std::vector<Sample>& samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto dim = samples.front().s.size();
  Batch b{Eigen::MatrixXd(dim, n), Eigen::RowVectorXd(n), Eigen::MatrixXd(dim, n),
          Eigen::RowVectorXd(n),   Eigen::RowVectorXd(n), Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = samples[static_cast<std::size_t>(i)];
    b.s.col(i) = x.s;
    b.a[i] = x.a;
    b.s_next.col(i) = x.s_next;
    b.r[i] = x.r;
    b.c[i] = x.c;
    b.done[i] = x.done ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::Config, "replay capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Sample sample) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(sample));
    return;
  }
  data_[head_] = std::move(sample);
  head_ = (head_ + 1) % capacity_;
}

const Sample& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw Error(ErrorCode::IndexOutOfRange, "replay index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw Error(ErrorCode::EmptyBatch, "batch size must be positive");
  if (batch_size > data_.size()) {
    throw Error(ErrorCode::InsufficientSamples, "not enough samples in the replay buffer");
  }
  // Floyd's algorithm: k distinct indices out of n with k draws.
  const std::size_t n = data_.size();
  std::vector<std::size_t> picked;
  picked.reserve(batch_size);
  for (std::size_t j = n - batch_size; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  return picked;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  std::vector<Sample> chosen;
  for (const auto i : sample_indices(batch_size, rng)) chosen.push_back(data_[i]);
  return make_batch(chosen);
}

}  // namespace cofc
