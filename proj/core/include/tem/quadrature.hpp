#pragma once

#include <functional>

namespace tem {

struct QuadratureResult {
  double value;
  double error_estimate;
  int intervals;
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_intervals = 4000;
};

/// Globally adaptive Gauss-Kronrod 15(7) integration of f over [a, b].
/// The worst interval (by Kronrod-Gauss error estimate) is bisected until
/// the summed estimate meets max(abs_tol, rel_tol * |value|).
QuadratureResult integrate_adaptive(const std::function<double(double)>& f,
                                    double a, double b,
                                    const QuadratureOptions& opts = {});

/// Same, but throws quadrature_error (carrying the achieved residual)
/// when the tolerance is not reached.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opts = {});

}  // namespace tem
