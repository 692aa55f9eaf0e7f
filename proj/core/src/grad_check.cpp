#include "catart/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "catart/errors.hpp"

namespace catart::nn {

GradCheckReport grad_check(const std::function<double()>& loss, const ParamBlocks& params,
                           const ConstParamBlocks& analytic, double tolerance, double step) {
  if (params.size() != analytic.size()) throw ShapeError("grad_check: block count mismatch");
  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != analytic[b].size()) throw ShapeError("grad_check: block size mismatch");
    auto p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss();
      p[i] = saved - step;
      const double down = loss();
      p[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[b][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      ++report.components;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
        report.max_rel_error = std::isfinite(rel_err) ? rel_err : INFINITY;
        report.worst_block = b;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace catart::nn
