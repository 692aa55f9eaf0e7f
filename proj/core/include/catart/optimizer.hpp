#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "catart/nn.hpp"

namespace catart::nn {

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
};

/// Update rule over a fixed list of parameter blocks. The block layout is
/// fixed at construction; Adam moment buffers are allocated with it (and only
/// for Adam).
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<std::size_t> block_sizes);

  /// Applies one update. Throws ShapeError when the blocks do not match the
  /// layout, and TrainingError (leaving every parameter untouched) when any
  /// gradient is non-finite.
  ///
  /// sgd:  p <- p - lr * g
  /// adam: m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
  ///       p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
  void step(const ParamBlocks& params, const ConstParamBlocks& grads);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  bool has_moments() const { return !first_moment_.empty(); }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  OptimizerConfig config_;
  std::vector<std::size_t> block_sizes_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  std::uint64_t steps_ = 0;
};

std::vector<std::size_t> block_sizes(const ConstParamBlocks& blocks);

}  // namespace catart::nn
