#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "catart/rng.hpp"

// Dense neural-network substrate: row-major matrices, fully connected layers
// with PReLU activations, and exact reverse-mode gradients for multi-layer
// perceptrons. Batches are stored one sample per row.

namespace catart::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Mutable / read-only views over a contiguous block of parameters. Models
/// expose their parameters as a list of blocks; gradient buffers expose a
/// congruent list.
using ParamBlocks = std::vector<std::span<double>>;
using ConstParamBlocks = std::vector<std::span<const double>>;

/// Throws ShapeError unless `m` has the given shape.
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what);

/// True when every entry is finite.
bool all_finite(std::span<const double> values);
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Numerically stable softmax (max-subtracted). Throws std::domain_error on
/// empty input.
Vector softmax(const Vector& logits);

/// softplus(x) = log(1 + exp(x)) without overflow.
double softplus(double x);

/// Logistic function, stable for large |x|.
double sigmoid(double x);

/// One fully connected layer, y = x W^T + b, optionally followed by a
/// per-channel PReLU. The final layer of an Mlp has no activation.
struct DenseLayer {
  Matrix weight;       // out x in
  Vector bias;         // out
  Vector prelu_slope;  // out, or empty when the layer is linear

  bool has_activation() const { return prelu_slope.size() > 0; }
  Eigen::Index in_size() const { return weight.cols(); }
  Eigen::Index out_size() const { return weight.rows(); }
};

/// Gradients of a scalar loss w.r.t. every parameter of an Mlp, plus the
/// gradient w.r.t. the forward input. Shape-congruent with its Mlp.
struct MlpGrads {
  std::vector<DenseLayer> layers;
  Matrix input;

  void set_zero();
  MlpGrads& operator+=(const MlpGrads& other);
  ConstParamBlocks blocks() const;
  ParamBlocks blocks();
};

/// Activation record of one forward pass. Single use: Mlp::backward consumes
/// it, and it is rejected if the parameters changed after it was recorded.
class MlpTape {
 public:
  MlpTape() = default;
  MlpTape(MlpTape&&) noexcept = default;
  MlpTape& operator=(MlpTape&&) noexcept = default;
  MlpTape(const MlpTape&) = delete;
  MlpTape& operator=(const MlpTape&) = delete;

  const Matrix& output() const { return activations_.back(); }
  bool valid() const { return stamp_ != 0; }

 private:
  friend class Mlp;
  std::uint64_t stamp_ = 0;
  std::vector<Matrix> activations_;  // activations_[0] is the input
  std::vector<Matrix> pre_activations_;
};

class Mlp {
 public:
  Mlp() = default;

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases, PReLU
  /// slopes `prelu_init` on every layer but the last.
  static Mlp glorot(std::vector<int> sizes, Rng& rng, double prelu_init = 0.25);

  /// All weights and biases zero; PReLU slopes `prelu_init`.
  static Mlp zeros(std::vector<int> sizes, double prelu_init = 0.25);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int output_size() const { return sizes_.empty() ? 0 : sizes_.back(); }
  std::size_t depth() const { return layers_.size(); }

  std::span<const DenseLayer> layers() const { return layers_; }

  /// Mutable access. Invalidates every outstanding tape.
  DenseLayer& layer(std::size_t k);

  /// Zeroes the final layer's weight and bias so the network outputs zero.
  void zero_output_layer();

  ParamBlocks parameter_blocks();
  ConstParamBlocks parameter_blocks() const;
  std::size_t parameter_count() const;

  /// Forward pass keeping every intermediate needed for backward().
  /// Throws ShapeError when input.cols() != input_size().
  MlpTape forward(const Matrix& input) const;

  /// Forward pass without a tape.
  Matrix infer(const Matrix& input) const;

  /// Exact gradients given dLoss/dOutput. Consumes the tape; throws
  /// std::logic_error if the tape is empty, already used, or was recorded
  /// before the parameters last changed.
  MlpGrads backward(MlpTape&& tape, const Matrix& upstream) const;

  /// A gradient buffer of the right shape, all zeros (input grad empty).
  MlpGrads zero_grads() const;

  /// Changes whenever parameters are handed out mutably.
  std::uint64_t stamp() const { return stamp_; }
  void touch();

 private:
  std::vector<DenseLayer> layers_;
  std::vector<int> sizes_;
  std::uint64_t stamp_ = 0;
};

}  // namespace catart::nn
