#pragma once

#include <vector>

#include "tem/family.hpp"

namespace tem {

/// Which slot of the divergence a center occupies.
enum class Side { left, right };

std::string to_string(Side s);
Side side_from_string(const std::string& s);

/// Normalized weighted set of natural parameters.
struct WeightedPopulation {
  std::vector<NaturalParam> points;
  std::vector<double> weights;

  static WeightedPopulation uniform(std::vector<NaturalParam> pts);
  /// Arbitrary nonnegative weights, normalized to sum 1.
  static WeightedPopulation weighted(std::vector<NaturalParam> pts,
                                     std::vector<double> raw_weights);

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().dim(); }
  void validate() const;
};

/// Per-axis outcome of the left-minimizer line search.
struct LeftAxisResult {
  double theta_l;
  double alpha_star;   // >= 1, inside the line-search bracket
  double n_value;      // N(theta_l) > 0 on success
  double bracket_hi;   // min_i D(theta_i)/N(theta_i)
  int iterations;
  bool multiple_roots; // pre-scan saw more than one sign change (diagnostic)
};

struct LeftMinimizerResult {
  NaturalParam theta_l;
  std::vector<LeftAxisResult> axes;
  /// theta_l left the per-axis [min theta_i, max theta_i] box somewhere.
  /// Expected for t < 1 (the minimizer need not satisfy bounding); diagnostic.
  bool bounding_violated = false;
};

/// Right population minimizer: sum_i w_i theta_i / exp_t^{1-t}(G_t(theta_i)),
/// applied per axis. Degrades to the weighted arithmetic mean at t = 1.
NaturalParam right_minimizer(const TemFamily& fam, const WeightedPopulation& pop);

/// Left population minimizer via the bracketed alpha line search
/// (bisection on the alpha residual; 200 iteration cap, 1e-12 tolerance).
/// At t = 1 returns the f-mean with alpha* = 1.
LeftMinimizerResult left_minimizer(const TemFamily& fam,
                                   const WeightedPopulation& pop);

/// alpha - D(theta(alpha))/N(theta(alpha)) with
/// theta(alpha) = grad G^{-1}(alpha E_i grad G(theta_i)), on one axis.
/// The left minimizer's alpha* is a root of this residual.
double alpha_residual(const TemFamily& fam, const WeightedPopulation& pop,
                      double alpha, std::size_t axis = 0);

/// Displacement theta_new - theta_old of the chosen population minimizer when
/// an outlier is mixed in with weight eps (original weights scaled by 1-eps).
NaturalParam influence_probe(const TemFamily& fam, const WeightedPopulation& pop,
                             const NaturalParam& outlier, double eps, Side side);

}  // namespace tem
