#pragma once

#include <cmath>

namespace monoloc {

/// Cauchy loss rho(s) = c^2 ln(1 + s / c^2) applied to squared residual norms.
/// An infinite scale degenerates to the plain quadratic rho(s) = s.
struct CauchyLoss {
  double scale = 1.0;

  double rho(double s) const {
    if (!std::isfinite(scale)) return s;
    const double c2 = scale * scale;
    return c2 * std::log1p(s / c2);
  }

  // d rho / d s
  double derivative(double s) const {
    if (!std::isfinite(scale)) return 1.0;
    return 1.0 / (1.0 + s / (scale * scale));
  }
};

}  // namespace monoloc
