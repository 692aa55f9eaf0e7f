#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "catart/nn.hpp"
#include "catart/rng.hpp"

namespace catart::test {

// Fresh directory under the working directory, emptied on construction.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

inline nn::Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  nn::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Scalar re-implementation of the MLP forward pass for one sample.
inline std::vector<double> scalar_forward(const nn::Mlp& mlp, std::vector<double> x) {
  for (const auto& layer : mlp.layers()) {
    std::vector<double> y(static_cast<std::size_t>(layer.out_size()));
    for (Eigen::Index o = 0; o < layer.out_size(); ++o) {
      double s = layer.bias(o);
      for (Eigen::Index i = 0; i < layer.in_size(); ++i) s += layer.weight(o, i) * x[static_cast<std::size_t>(i)];
      if (layer.has_activation() && s < 0) s *= layer.prelu_slope(o);
      y[static_cast<std::size_t>(o)] = s;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace catart::test
