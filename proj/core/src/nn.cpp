#include "catart/nn.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "catart/errors.hpp"

namespace catart::nn {

namespace {

std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ShapeError("mlp needs at least an input and an output size");
  for (const int s : sizes) {
    if (s <= 0) throw ShapeError("mlp layer sizes must be positive");
  }
}

}  // namespace

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

bool all_finite(std::span<const double> values) {
  for (const double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw std::domain_error("softmax of an empty vector");
  const double peak = logits.maxCoeff();
  Vector out = (logits.array() - peak).exp();
  out /= out.sum();
  return out;
}

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// MlpGrads

void MlpGrads::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
    l.prelu_slope.setZero();
  }
  input.setZero();
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient buffers differ in depth");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
    layers[k].prelu_slope += other.layers[k].prelu_slope;
  }
  if (input.size() == 0) {
    input = other.input;
  } else if (other.input.size() != 0) {
    input += other.input;
  }
  return *this;
}

ConstParamBlocks MlpGrads::blocks() const {
  ConstParamBlocks out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.prelu_slope.size() > 0) {
      out.emplace_back(l.prelu_slope.data(), static_cast<std::size_t>(l.prelu_slope.size()));
    }
  }
  return out;
}

ParamBlocks MlpGrads::blocks() {
  ParamBlocks out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.prelu_slope.size() > 0) {
      out.emplace_back(l.prelu_slope.data(), static_cast<std::size_t>(l.prelu_slope.size()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp Mlp::zeros(std::vector<int> sizes, double prelu_init) {
  check_sizes(sizes);
  Mlp mlp;
  mlp.sizes_ = std::move(sizes);
  const std::size_t n_layers = mlp.sizes_.size() - 1;
  mlp.layers_.resize(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    auto& l = mlp.layers_[k];
    l.weight = Matrix::Zero(mlp.sizes_[k + 1], mlp.sizes_[k]);
    l.bias = Vector::Zero(mlp.sizes_[k + 1]);
    if (k + 1 < n_layers) l.prelu_slope = Vector::Constant(mlp.sizes_[k + 1], prelu_init);
  }
  mlp.stamp_ = next_stamp();
  return mlp;
}

Mlp Mlp::glorot(std::vector<int> sizes, Rng& rng, double prelu_init) {
  Mlp mlp = zeros(std::move(sizes), prelu_init);
  for (auto& l : mlp.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_size() + l.out_size()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
      l.weight.data()[i] = rng.uniform(-limit, limit);
    }
  }
  return mlp;
}

DenseLayer& Mlp::layer(std::size_t k) {
  touch();
  return layers_.at(k);
}

void Mlp::touch() { stamp_ = next_stamp(); }

void Mlp::zero_output_layer() {
  touch();
  layers_.back().weight.setZero();
  layers_.back().bias.setZero();
}

ParamBlocks Mlp::parameter_blocks() {
  touch();
  ParamBlocks out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.has_activation()) {
      out.emplace_back(l.prelu_slope.data(), static_cast<std::size_t>(l.prelu_slope.size()));
    }
  }
  return out;
}

ConstParamBlocks Mlp::parameter_blocks() const {
  ConstParamBlocks out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    if (l.has_activation()) {
      out.emplace_back(l.prelu_slope.data(), static_cast<std::size_t>(l.prelu_slope.size()));
    }
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : parameter_blocks()) n += b.size();
  return n;
}

MlpTape Mlp::forward(const Matrix& input) const {
  if (layers_.empty()) throw ShapeError("forward on an empty mlp");
  if (input.cols() != input_size()) {
    throw ShapeError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(input_size()));
  }
  MlpTape tape;
  tape.stamp_ = stamp_;
  tape.activations_.reserve(layers_.size() + 1);
  tape.pre_activations_.reserve(layers_.size());
  tape.activations_.push_back(input);
  for (const auto& l : layers_) {
    Matrix z = tape.activations_.back() * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    Matrix a = z;
    if (l.has_activation()) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          if (a(r, c) < 0) a(r, c) *= l.prelu_slope[c];
        }
      }
    }
    tape.pre_activations_.push_back(std::move(z));
    tape.activations_.push_back(std::move(a));
  }
  return tape;
}

Matrix Mlp::infer(const Matrix& input) const {
  if (layers_.empty()) throw ShapeError("forward on an empty mlp");
  if (input.cols() != input_size()) {
    throw ShapeError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(input_size()));
  }
  Matrix a = input;
  for (const auto& l : layers_) {
    Matrix z = a * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    if (l.has_activation()) {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
          if (z(r, c) < 0) z(r, c) *= l.prelu_slope[c];
        }
      }
    }
    a = std::move(z);
  }
  return a;
}

MlpGrads Mlp::backward(MlpTape&& tape, const Matrix& upstream) const {
  if (!tape.valid()) throw std::logic_error("mlp tape is empty or was already consumed");
  if (tape.stamp_ != stamp_) {
    throw std::logic_error("mlp tape is stale: parameters changed after the forward pass");
  }
  const Matrix& out = tape.activations_.back();
  require_shape(upstream, out.rows(), out.cols(), "mlp upstream gradient");

  MlpGrads grads;
  grads.layers.resize(layers_.size());
  Matrix delta = upstream;  // dLoss / d(activation of layer k)
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    auto& g = grads.layers[k];
    const Matrix& z = tape.pre_activations_[k];
    if (l.has_activation()) {
      g.prelu_slope = Vector::Zero(l.out_size());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
          if (z(r, c) < 0) {
            g.prelu_slope[c] += delta(r, c) * z(r, c);
            delta(r, c) *= l.prelu_slope[c];
          }
        }
      }
    }
    // delta is now dLoss/dz
    g.weight = delta.transpose() * tape.activations_[k];
    g.bias = delta.colwise().sum().transpose();
    delta = delta * l.weight;
  }
  grads.input = std::move(delta);

  tape.stamp_ = 0;
  tape.activations_.clear();
  tape.pre_activations_.clear();
  return grads;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  g.layers.resize(layers_.size());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    g.layers[k].weight = Matrix::Zero(l.out_size(), l.in_size());
    g.layers[k].bias = Vector::Zero(l.out_size());
    if (l.has_activation()) g.layers[k].prelu_slope = Vector::Zero(l.out_size());
  }
  return g;
}

}  // namespace catart::nn
