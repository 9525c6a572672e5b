#pragma once

#include "cofc/error.hpp"
#include "cofc/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

namespace cofc {

enum class Activation { Identity, Tanh, Relu };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// Fully connected network with explicit reverse-mode gradients.
///
/// All weights and biases live in one contiguous parameter vector (layer by
/// layer, weight matrix column-major followed by its bias), so optimizers,
/// target-network averaging and checkpoints operate on a single Eigen vector.
/// Batched calls take one sample per column.
template <typename Scalar>
class Mlp {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using WeightMap = Eigen::Map<Matrix>;
  using ConstWeightMap = Eigen::Map<const Matrix>;

  struct Tape {
    std::vector<Matrix> activations;  // input followed by each layer's output
    Matrix output_preactivation;
  };

  struct Gradient {
    Vector params;  // summed over the batch
    Matrix input;   // one column per sample
  };

  Mlp() = default;

  Mlp(std::vector<int> layer_sizes, Activation hidden = Activation::Tanh,
      Activation output = Activation::Identity)
      : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) throw Error(ErrorCode::ShapeMismatch, "an MLP needs at least two layer sizes");
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
        throw Error(ErrorCode::ShapeMismatch, "layer sizes must be positive");
      }
      offsets_.push_back(offset);
      offset += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vector::Zero(offset);
  }

  /// Uniform(+-1/sqrt(fan_in)) hidden layers; the output layer is drawn from
  /// Uniform(+-output_scale) when output_scale > 0.
  void initialize(Rng& rng, Scalar output_scale = Scalar(0)) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const bool last = l + 1 == num_layers();
      const Scalar bound = last && output_scale > Scalar(0)
                               ? output_scale
                               : Scalar(1) / std::sqrt(static_cast<Scalar>(sizes_[l]));
      auto w = weight(l);
      auto b = bias(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(rng.uniform(-1.0, 1.0)) * bound;
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = Scalar(rng.uniform(-1.0, 1.0)) * bound;
    }
  }

  std::size_t num_layers() const { return offsets_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  WeightMap weight(std::size_t l) {
    return WeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  ConstWeightMap weight(std::size_t l) const {
    return ConstWeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  Eigen::Map<Vector> bias(std::size_t l) {
    return Eigen::Map<Vector>(params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l],
                              sizes_[l + 1]);
  }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    return Eigen::Map<const Vector>(
        params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]);
  }

  Matrix forward(const Matrix& inputs, Tape* tape = nullptr) const {
    if (inputs.rows() != input_size()) {
      throw Error(ErrorCode::ShapeMismatch, "input length does not match the first layer");
    }
    Matrix a = inputs;
    if (tape) {
      tape->activations.clear();
      tape->activations.push_back(a);
    }
    for (std::size_t l = 0; l < num_layers(); ++l) {
      Matrix z = weight(l) * a;
      z.colwise() += bias(l);
      if (tape && l + 1 == num_layers()) tape->output_preactivation = z;
      apply(l + 1 == num_layers() ? output_ : hidden_, z);
      a = std::move(z);
      if (tape) tape->activations.push_back(a);
    }
    return a;
  }

  Vector forward(const Vector& input) const {
    return forward(Matrix(input)).col(0);
  }

  /// Gradients of sum_k <upstream_k, output_k> with respect to the
  /// parameters and to each input column.
  /// `preactivation_upstream`, when given, is added to the gradient with
  /// respect to the output layer's pre-activation.
  Gradient backward(const Tape& tape, const Matrix& upstream,
                    const Matrix* preactivation_upstream = nullptr) const {
    if (tape.activations.size() != num_layers() + 1 || upstream.rows() != output_size() ||
        upstream.cols() != tape.activations.back().cols()) {
      throw Error(ErrorCode::ShapeMismatch, "upstream gradient does not match the forward pass");
    }
    Gradient grad{Vector::Zero(params_.size()), Matrix()};
    Matrix delta = upstream;
    for (std::size_t l = num_layers(); l-- > 0;) {
      scale_by_derivative(l + 1 == num_layers() ? output_ : hidden_, tape.activations[l + 1], delta);
      if (preactivation_upstream && l + 1 == num_layers()) delta += *preactivation_upstream;
      const Matrix& prev = tape.activations[l];
      Eigen::Map<Matrix>(grad.params.data() + offsets_[l], sizes_[l + 1], sizes_[l]).noalias() =
          delta * prev.transpose();
      Eigen::Map<Vector>(grad.params.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l],
                         sizes_[l + 1]) = delta.rowwise().sum();
      delta = weight(l).transpose() * delta;
    }
    grad.input = std::move(delta);
    return grad;
  }

 private:
  static void apply(Activation act, Matrix& z) {
    switch (act) {
      case Activation::Identity: break;
      case Activation::Tanh: z = z.array().tanh().matrix(); break;
      case Activation::Relu: z = z.cwiseMax(Scalar(0)); break;
    }
  }

  // Multiplies delta by f'(z) expressed through the activation output.
  static void scale_by_derivative(Activation act, const Matrix& out, Matrix& delta) {
    switch (act) {
      case Activation::Identity: break;
      case Activation::Tanh: delta.array() *= Scalar(1) - out.array().square(); break;
      case Activation::Relu: delta.array() *= (out.array() > Scalar(0)).template cast<Scalar>(); break;
    }
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Activation hidden_ = Activation::Tanh;
  Activation output_ = Activation::Identity;
  Vector params_;
};

using MlpD = Mlp<double>;

template <typename Scalar>
typename Mlp<Scalar>::Vector mlp_forward(const Mlp<Scalar>& net,
                                         const typename Mlp<Scalar>::Vector& input) {
  return net.forward(input);
}

template <typename Scalar>
typename Mlp<Scalar>::Gradient mlp_gradient(const Mlp<Scalar>& net,
                                            const typename Mlp<Scalar>::Vector& input,
                                            const typename Mlp<Scalar>::Vector& upstream) {
  typename Mlp<Scalar>::Tape tape;
  net.forward(typename Mlp<Scalar>::Matrix(input), &tape);
  return net.backward(tape, typename Mlp<Scalar>::Matrix(upstream));
}

/// target <- tau * live + (1 - tau) * target.
template <typename Scalar>
void polyak_update(const Mlp<Scalar>& live, Mlp<Scalar>& target, Scalar tau) {
  if (live.params().size() != target.params().size()) {
    throw Error(ErrorCode::ShapeMismatch, "target network shape differs from live network");
  }
  if (tau == Scalar(1)) {
    target.params() = live.params();
    return;
  }
  target.params() = tau * live.params() + (Scalar(1) - tau) * target.params();
}

}  // namespace cofc
