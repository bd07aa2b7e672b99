#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gsflow {

// Central-difference gradient of a deterministic scalar function. The
// evaluator is probed twice at the base point first; any mismatch means it is
// not re-entrant and the whole check would be meaningless, so that is a hard
// error. Callers wrap manifold parameters (poses, quaternions) so that the
// coordinate vector is a plain tangent chart, e.g. via pose_retract.
inline std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& x0, double step) {
  const double base0 = loss(x0);
  const double base1 = loss(x0);
  if (!(base0 == base1))
    throw std::runtime_error("finite_diff_gradient: evaluator is not deterministic");

  std::vector<double> grad(x0.size());
  std::vector<double> x = x0;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    x[k] = x0[k] + step;
    const double plus = loss(x);
    x[k] = x0[k] - step;
    const double minus = loss(x);
    x[k] = x0[k];
    grad[k] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

inline double gradcheck_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace gsflow
