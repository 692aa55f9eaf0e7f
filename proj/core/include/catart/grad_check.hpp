#pragma once

#include <cstddef>
#include <functional>

#include "catart/nn.hpp"

namespace catart::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_block = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t components = 0;
  bool passed = true;
};

/// Components with |analytic| and |numeric| both below this are compared on
/// an absolute scale: rel = |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-3;

/// Central finite differences, component by component:
///   numeric = (loss(p + h) - loss(p - h)) / 2h
/// `loss` must read the parameters through `params`; every perturbed entry is
/// restored before returning. `analytic` is congruent with `params`.
GradCheckReport grad_check(const std::function<double()>& loss, const ParamBlocks& params,
                           const ConstParamBlocks& analytic, double tolerance,
                           double step = 1e-4);

inline GradCheckReport grad_check(const std::function<double()>& loss, const ParamBlocks& params,
                                  const ParamBlocks& analytic, double tolerance, double step = 1e-4) {
  return grad_check(loss, params, ConstParamBlocks(analytic.begin(), analytic.end()), tolerance, step);
}

}  // namespace catart::nn
