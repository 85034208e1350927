#pragma once

#include <cmath>
#include <limits>

#include "tem/errors.hpp"

namespace tem {

/// Deformation parameter t in [0,1] and its cached dual t* = 1/(2-t).
/// t = 1 is the classical (exp/log) limit, where t* = 1 as well.
struct Temper {
  double t;
  double t_star;

  static Temper of(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw domain_error("temper t must lie in [0,1], got " + std::to_string(t));
    }
    return Temper{t, 1.0 / (2.0 - t)};
  }

  /// True when the t=1 limit branch applies (exp_t/log_t are 0/0 there).
  bool classical() const { return std::abs(1.0 - t) < 1e-9; }
};

namespace detail {
constexpr double kClassicalEps = 1e-9;
}

/// exp_q(z) = [1 + (1-q) z]_+^{1/(1-q)}, classical exp for q ~ 1.
/// For q < 1 values below the cutoff z = -1/(1-q) clamp to exactly 0.
/// For q > 1 (used by the q = 1/t* = 2-t identities) the same expression
/// diverges at the cutoff; +inf is returned past it.
inline double exp_deformed(double q, double z) {
  const double om = 1.0 - q;
  if (std::abs(om) < detail::kClassicalEps) return std::exp(z);
  const double bracket = 1.0 + om * z;
  if (bracket <= 0.0) {
    return om > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::exp(std::log1p(om * z) / om);
}

/// log_q(z) = (z^{1-q} - 1)/(1-q), classical log for q ~ 1.
/// Precondition: z >= 0. log_q(0) = -1/(1-q) for q < 1.
inline double log_deformed(double q, double z) {
  const double om = 1.0 - q;
  if (std::abs(om) < detail::kClassicalEps) return std::log(z);
  if (z == 0.0) {
    return om > 0.0 ? -1.0 / om : -std::numeric_limits<double>::infinity();
  }
  return std::expm1(om * std::log(z)) / om;
}

inline double exp_t(const Temper& tp, double z) { return exp_deformed(tp.t, z); }

inline double log_t(const Temper& tp, double z) {
  if (z < 0.0) throw domain_error("log_t: argument must be nonnegative");
  if (z == 0.0 && tp.classical()) {
    throw domain_error("log_t: argument 0 diverges at t = 1");
  }
  return log_deformed(tp.t, z);
}

/// Dual (perspective) transform of exp_t: (exp_t)*(z) = t* exp_{t*}(z/t*).
inline double exp_t_star(const Temper& tp, double z) {
  return tp.t_star * exp_deformed(tp.t_star, z / tp.t_star);
}

/// Dual of log_t; functional inverse of exp_t_star.
inline double log_t_star(const Temper& tp, double z) {
  if (z <= 0.0) throw domain_error("log_t_star: argument must be positive");
  return tp.t_star * log_deformed(tp.t_star, z / tp.t_star);
}

/// x (+)_t y = x + y + (1-t) x y, so exp_t(x (+)_t y) = exp_t(x) exp_t(y).
inline double t_add(const Temper& tp, double x, double y) {
  return x + y + (1.0 - tp.t) * x * y;
}

/// x (-)_t y = (x - y)/(1 + (1-t) y), so exp_t(x (-)_t y) = exp_t(x)/exp_t(y).
inline double t_sub(const Temper& tp, double x, double y) {
  const double denom = 1.0 + (1.0 - tp.t) * y;
  if (denom == 0.0) throw domain_error("t_sub: 1 + (1-t) y vanishes");
  return (x - y) / denom;
}

/// x (x)_t y = (x^{1-t} + y^{1-t} - 1)_+^{1/(1-t)}; requires x, y >= 0.
inline double t_mul(const Temper& tp, double x, double y) {
  if (x < 0.0 || y < 0.0) throw domain_error("t_mul: arguments must be nonnegative");
  return exp_deformed(tp.t, log_deformed(tp.t, x) + log_deformed(tp.t, y));
}

/// x (/)_t y = (x^{1-t} - y^{1-t} + 1)_+^{1/(1-t)}; requires x, y >= 0.
inline double t_div(const Temper& tp, double x, double y) {
  if (x < 0.0 || y < 0.0) throw domain_error("t_div: arguments must be nonnegative");
  return exp_deformed(tp.t, log_deformed(tp.t, x) - log_deformed(tp.t, y));
}

}  // namespace tem
