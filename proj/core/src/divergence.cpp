#include "tem/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "tem/errors.hpp"
#include "tem/quadrature.hpp"

namespace tem {

double bregman(const TemFamily& fam, double theta_hat, double theta) {
  const double g_hat = fam.cumulant(theta_hat);
  const double g = fam.cumulant(theta);
  const double grad = fam.grad_cumulant(theta);
  return g_hat - g - (theta_hat - theta) * grad;
}

double bregman(const TemFamily& fam, const NaturalParam& theta_hat,
               const NaturalParam& theta) {
  if (theta_hat.dim() != theta.dim()) {
    throw domain_error("bregman: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < theta.dim(); ++i) {
    s += bregman(fam, theta_hat[i], theta[i]);
  }
  return s;
}

DivergenceValue conformal(const TemFamily& fam, double theta_hat, double theta) {
  const double num = bregman(fam, theta_hat, theta);
  const double den = fam.conformal_factor(theta_hat);
  if (!(den > 0.0)) {
    throw domain_error("conformal factor nonpositive at theta_hat = " +
                       std::to_string(theta_hat));
  }
  return {num / den, num, den};
}

double conformal(const TemFamily& fam, const NaturalParam& theta_hat,
                 const NaturalParam& theta) {
  if (theta_hat.dim() != theta.dim()) {
    throw domain_error("conformal: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < theta.dim(); ++i) {
    s += conformal(fam, theta_hat[i], theta[i]).value;
  }
  return s;
}

double tempered_f_divergence(const TemFamily& fam, double theta_hat,
                             double theta) {
  const Temper tp = fam.temper();
  const double g_hat = fam.cumulant(theta_hat);
  const double g = fam.cumulant(theta);
  const Interval sup_hat = fam.support(theta_hat);
  const Interval iv = fam.quad_interval(theta);
  const double scale = fam.measure_scale();

  if (tp.classical()) {
    // -log(p_hat/p) p = (log p - log p_hat) p, with log-densities formed
    // directly from the exponent to avoid overflow in the tails.
    return integrate(
        [&](double x) {
          const double p = fam.phi(x);
          const double log_p = theta * p - g;
          const double log_p_hat = theta_hat * p - g_hat;
          return scale * (log_p - log_p_hat) * std::exp(log_p);
        },
        iv.lo, iv.hi);
  }

  return integrate(
      [&](double x) {
        const double p = fam.phi(x);
        const double dens = exp_t(tp, t_sub(tp, theta * p, g));
        if (dens == 0.0) return 0.0;
        const double dens_hat =
            (x < sup_hat.lo || x > sup_hat.hi)
                ? 0.0
                : exp_t(tp, t_sub(tp, theta_hat * p, g_hat));
        const double ratio = t_div(tp, dens_hat, dens);
        return scale * (-log_deformed(tp.t, ratio)) * dens;
      },
      iv.lo, iv.hi);
}

bool f_divergence_compatible(const TemFamily& fam, double theta_hat,
                             double theta) {
  const Temper tp = fam.temper();
  if (tp.classical()) {
    // Classically the supports coincide (up to truncation) and the ratio of
    // exponentials never vanishes.
    return true;
  }
  const double g_hat = fam.cumulant(theta_hat);
  const double g = fam.cumulant(theta);
  const Interval sup_hat = fam.support(theta_hat);
  const Interval iv = fam.support(theta);
  const double om = 1.0 - tp.t;
  const int n = 512;
  for (int i = 0; i <= n; ++i) {
    const double x = iv.lo + (iv.hi - iv.lo) * i / n;
    const double dens = exp_t(tp, t_sub(tp, theta * fam.phi(x), g));
    if (dens == 0.0) continue;
    // p_hat must be positive wherever p is (tempered absolute continuity)...
    if (x < sup_hat.lo || x > sup_hat.hi) return false;
    const double dens_hat = exp_t(tp, t_sub(tp, theta_hat * fam.phi(x), g_hat));
    if (dens_hat == 0.0) return false;
    // ...and the deformed ratio itself must stay above the [.]_+ cutoff.
    if (std::pow(dens_hat, om) - std::pow(dens, om) + 1.0 <= 1e-12) return false;
  }
  return true;
}

double psi_bregman(const TemFamily& fam, double theta_a, double theta_b) {
  const Temper tp = fam.temper();
  const double g_a = fam.cumulant(theta_a);
  const double g_b = fam.cumulant(theta_b);
  const Interval sup_a = fam.support(theta_a);
  const Interval sup_b = fam.support(theta_b);
  const Interval qa = fam.quad_interval(theta_a);
  const Interval qb = fam.quad_interval(theta_b);
  const Interval iv{std::min(qa.lo, qb.lo), std::max(qa.hi, qb.hi)};
  const double scale = fam.measure_scale();

  if (tp.classical()) {
    // Generalized KL integrand u log(u/v) - u + v via log-densities.
    return integrate(
        [&](double x) {
          const double p = fam.phi(x);
          const double log_u = theta_a * p - g_a;
          const double log_v = theta_b * p - g_b;
          const double u = std::exp(log_u);
          const double v = std::exp(log_v);
          return scale * (u * (log_u - log_v) - u + v);
        },
        iv.lo, iv.hi);
  }

  // D_psi(u, v) = u log_t u - u log_t v - log_{t-1} u + log_{t-1} v with the
  // log_{t-1} difference formed jointly so the affine constants cancel.
  const double om2 = 2.0 - tp.t;
  return integrate(
      [&](double x) {
        const double p = fam.phi(x);
        const double u = (x < sup_a.lo || x > sup_a.hi)
                             ? 0.0
                             : exp_t(tp, t_sub(tp, theta_a * p, g_a));
        const double v = (x < sup_b.lo || x > sup_b.hi)
                             ? 0.0
                             : exp_t(tp, t_sub(tp, theta_b * p, g_b));
        const double cross =
            u == 0.0 ? 0.0 : u * (log_deformed(tp.t, u) - log_deformed(tp.t, v));
        const double tail = (std::pow(v, om2) - std::pow(u, om2)) / om2;
        return scale * (cross + tail);
      },
      iv.lo, iv.hi);
}

double conformal_factor_mass_link(const TemFamily& fam, double theta_hat) {
  const Temper tp = fam.temper();
  const double g_hat = fam.cumulant(theta_hat);
  // D_t(theta)^{1/(1-t*)} written as exp_{t*}(G_t/t*), which stays smooth
  // through t = 1.
  const double lhs = exp_deformed(tp.t_star, g_hat / tp.t_star);
  const Interval iv = fam.quad_interval(theta_hat);
  const double scale = fam.measure_scale();
  const double rhs = integrate(
      [&](double x) {
        return scale * exp_deformed(tp.t_star, theta_hat * fam.phi(x) / tp.t_star);
      },
      iv.lo, iv.hi);
  return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
}

}  // namespace tem
