#pragma once

#include "tem/family.hpp"

namespace tem {

/// Conformal Bregman divergence value with its two parts exposed:
/// value = numerator / denominator, numerator the plain Bregman divergence
/// D_{G_t}, denominator the conformal factor 1 + (1-t) G_t(theta_hat).
struct DivergenceValue {
  double value;
  double numerator;
  double denominator;
};

/// Bregman divergence D_{G_t}(theta_hat || theta) with generator G_t.
double bregman(const TemFamily& fam, double theta_hat, double theta);
/// Multi-dimensional inputs sum coordinate-wise scalar divergences.
double bregman(const TemFamily& fam, const NaturalParam& theta_hat,
               const NaturalParam& theta);

/// Conformal Bregman divergence B_{G_t}(theta_hat || theta).
DivergenceValue conformal(const TemFamily& fam, double theta_hat, double theta);
/// Per-axis conformal divergences (factor applied per axis) summed.
double conformal(const TemFamily& fam, const NaturalParam& theta_hat,
                 const NaturalParam& theta);

/// Tempered f-divergence F_t between two members of the family, computed by
/// quadrature of -log_t(p_hat (/)_t p) against the unnormalized measure of
/// theta.
///
/// Equals conformal(fam, theta_hat, theta) whenever the deformed ratio
/// p_hat (/)_t p stays positive on the support of p (the tempered analogue
/// of absolute continuity; see f_divergence_compatible). Where the ratio
/// clamps to zero, -log_t saturates at 1/(1-t) and F_t falls strictly below
/// the conformal divergence instead of diverging like the classical KL.
double tempered_f_divergence(const TemFamily& fam, double theta_hat,
                             double theta);

/// True when p_hat (/)_t p never clamps on the support of p, i.e. the regime
/// where F_t and the conformal divergence coincide. Checked on a dense
/// sample of the support.
bool f_divergence_compatible(const TemFamily& fam, double theta_hat,
                             double theta);

/// Density-level Bregman divergence with the Tsallis generator psi_t,
/// integrated over the sample space. Equals the conformal divergence with
/// swapped arguments: psi_bregman(fam, a, b) = conformal(fam, b, a).value.
double psi_bregman(const TemFamily& fam, double theta_a, double theta_b);

/// Checks the conformal-factor/mass link
///   D_t(theta_hat)^{1/(1-t*)} = integral exp_{t*}(theta_hat phi(x)/t*) dxi
/// by quadrature and returns the relative discrepancy.
double conformal_factor_mass_link(const TemFamily& fam, double theta_hat);

}  // namespace tem
