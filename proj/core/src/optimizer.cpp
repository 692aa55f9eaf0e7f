#include "catart/optimizer.hpp"

#include <cmath>
#include <string>

#include "catart/errors.hpp"

namespace catart::nn {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam|sgd)");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

std::vector<std::size_t> block_sizes(const ConstParamBlocks& blocks) {
  std::vector<std::size_t> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.size());
  return out;
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<std::size_t> block_sizes)
    : config_(config), block_sizes_(std::move(block_sizes)) {
  if (!(config_.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (config_.kind == OptimizerKind::adam) {
    first_moment_.reserve(block_sizes_.size());
    second_moment_.reserve(block_sizes_.size());
    for (const std::size_t n : block_sizes_) {
      first_moment_.emplace_back(n, 0.0);
      second_moment_.emplace_back(n, 0.0);
    }
  }
}

void Optimizer::step(const ParamBlocks& params, const ConstParamBlocks& grads) {
  if (params.size() != block_sizes_.size() || grads.size() != block_sizes_.size()) {
    throw ShapeError("optimizer: expected " + std::to_string(block_sizes_.size()) +
                     " parameter blocks");
  }
  for (std::size_t b = 0; b < block_sizes_.size(); ++b) {
    if (params[b].size() != block_sizes_[b] || grads[b].size() != block_sizes_[b]) {
      throw ShapeError("optimizer: block " + std::to_string(b) + " has the wrong size");
    }
    if (!all_finite(grads[b])) {
      throw TrainingError("optimizer: non-finite gradient in block " + std::to_string(b) +
                          "; step refused");
    }
  }

  ++steps_;
  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto p = params[b];
      const auto g = grads[b];
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] + wd * p[i]);
    }
    return;
  }

  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    const auto g = grads[b];
    auto& m = first_moment_[b];
    auto& v = second_moment_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + wd * p[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace catart::nn
