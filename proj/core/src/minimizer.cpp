#include "tem/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tem/errors.hpp"

namespace tem {

std::string to_string(Side s) { return s == Side::left ? "left" : "right"; }

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw domain_error("unknown side: " + s);
}

WeightedPopulation WeightedPopulation::uniform(std::vector<NaturalParam> pts) {
  WeightedPopulation pop;
  pop.weights.assign(pts.size(), pts.empty() ? 0.0 : 1.0 / pts.size());
  pop.points = std::move(pts);
  pop.validate();
  return pop;
}

WeightedPopulation WeightedPopulation::weighted(std::vector<NaturalParam> pts,
                                                std::vector<double> raw) {
  if (pts.size() != raw.size()) {
    throw domain_error("population: points/weights size mismatch");
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(total > 0.0)) throw domain_error("population: weights must sum > 0");
  for (double& w : raw) w /= total;
  WeightedPopulation pop;
  pop.points = std::move(pts);
  pop.weights = std::move(raw);
  pop.validate();
  return pop;
}

void WeightedPopulation::validate() const {
  if (points.empty()) throw domain_error("population must be nonempty");
  if (points.size() != weights.size()) {
    throw domain_error("population: points/weights size mismatch");
  }
  const std::size_t d = points.front().dim();
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != d) throw domain_error("population: mixed dimensions");
    if (weights[i] < 0.0) throw domain_error("population: negative weight");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw domain_error("population: weights must sum to 1");
  }
}

namespace {

struct AxisSlice {
  std::vector<double> thetas;
  std::vector<double> weights;
};

// Zero-weight points contribute nothing to either loss; drop them up front.
AxisSlice slice_axis(const WeightedPopulation& pop, std::size_t axis) {
  AxisSlice s;
  s.thetas.reserve(pop.size());
  s.weights.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (pop.weights[i] == 0.0) continue;
    s.thetas.push_back(pop.points[i][axis]);
    s.weights.push_back(pop.weights[i]);
  }
  if (s.thetas.empty()) throw domain_error("population has no positive weight");
  return s;
}

struct LeftContext {
  const TemFamily& fam;
  double one_minus_t;
  double mean_grad;  // E_i grad G(theta_i)
  double n0, n1;     // N(theta) = n0 + n1 theta

  double n_at(double theta) const { return n0 + n1 * theta; }
  double d_at(double theta) const {
    return 1.0 + one_minus_t * fam.cumulant(theta);
  }
  double theta_of_alpha(double alpha) const {
    return fam.inv_grad_cumulant(alpha * mean_grad);
  }
  // alpha - D/N composed through theta(alpha); NaN when theta(alpha) is
  // outside the domain or N vanishes.
  double residual(double alpha) const {
    double theta;
    try {
      theta = theta_of_alpha(alpha);
    } catch (const domain_error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    const double n = n_at(theta);
    if (n == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return alpha - d_at(theta) / n;
  }
};

LeftContext make_left_context(const TemFamily& fam, const AxisSlice& s) {
  LeftContext ctx{fam, 1.0 - fam.temper().t, 0.0, 0.0, 0.0};
  double tangent0 = 0.0;
  for (std::size_t i = 0; i < s.thetas.size(); ++i) {
    const double g = fam.cumulant(s.thetas[i]);
    const double grad = fam.grad_cumulant(s.thetas[i]);
    ctx.mean_grad += s.weights[i] * grad;
    tangent0 += s.weights[i] * (g - s.thetas[i] * grad);
  }
  ctx.n0 = 1.0 + ctx.one_minus_t * tangent0;
  ctx.n1 = ctx.one_minus_t * ctx.mean_grad;
  return ctx;
}

constexpr int kMaxBisection = 200;
constexpr double kAlphaTol = 1e-12;
constexpr int kPrescanPoints = 64;

LeftAxisResult solve_left_axis(const TemFamily& fam, const AxisSlice& s) {
  const Temper tp = fam.temper();
  const LeftContext ctx = make_left_context(fam, s);

  if (tp.classical()) {
    const double theta_l = fam.inv_grad_cumulant(ctx.mean_grad);
    return {theta_l, 1.0, 1.0, 1.0, 0, false};
  }

  // Bracket upper bound: min_i D(theta_i)/N(theta_i) over points with
  // positive N (Lemma's condition); devolve to the f-mean when it collapses.
  double bracket_hi = std::numeric_limits<double>::infinity();
  bool any_positive_n = false;
  for (double theta_i : s.thetas) {
    const double n = ctx.n_at(theta_i);
    if (n > 0.0) {
      any_positive_n = true;
      bracket_hi = std::min(bracket_hi, ctx.d_at(theta_i) / n);
    }
  }
  if (!any_positive_n) {
    throw n_nonpositive_error("N(theta_i) <= 0 for every population point");
  }
  if (bracket_hi < 1.0 + 1e-12) {
    const double theta_l = fam.inv_grad_cumulant(ctx.mean_grad);
    return {theta_l, 1.0, ctx.n_at(theta_l), bracket_hi, 0, false};
  }

  // Pre-scan: locate sign changes of the residual; more than one is reported
  // as a diagnostic (bisection then refines the first).
  double prev_alpha = std::numeric_limits<double>::quiet_NaN();
  double prev_res = std::numeric_limits<double>::quiet_NaN();
  double root_lo = 0.0, root_hi = 0.0;
  double best_abs = std::numeric_limits<double>::infinity();
  double best_alpha = 1.0;
  int sign_changes = 0;
  bool any_positive_n_on_path = false;
  for (int j = 0; j < kPrescanPoints; ++j) {
    const double alpha =
        1.0 + (bracket_hi - 1.0) * static_cast<double>(j) / (kPrescanPoints - 1);
    const double res = ctx.residual(alpha);
    if (std::isnan(res)) continue;
    double theta = ctx.theta_of_alpha(alpha);
    if (ctx.n_at(theta) > 0.0) any_positive_n_on_path = true;
    if (std::abs(res) < best_abs) {
      best_abs = std::abs(res);
      best_alpha = alpha;
    }
    if (!std::isnan(prev_res) && res != 0.0 && prev_res != 0.0 &&
        std::signbit(res) != std::signbit(prev_res)) {
      if (sign_changes == 0) {
        root_lo = prev_alpha;
        root_hi = alpha;
      }
      ++sign_changes;
    }
    if (res == 0.0) {
      // Exact hit.
      return {theta, alpha, ctx.n_at(theta), bracket_hi, j, false};
    }
    prev_alpha = alpha;
    prev_res = res;
  }
  if (sign_changes == 0) {
    if (!any_positive_n_on_path) {
      throw n_nonpositive_error("N(theta(alpha)) <= 0 throughout the bracket");
    }
    // A root can round off the bracket edge when the population is nearly
    // degenerate; a near-zero residual is accepted as the root then.
    if (best_abs < 1e-9) {
      const double theta = ctx.theta_of_alpha(best_alpha);
      return {theta, best_alpha, ctx.n_at(theta), bracket_hi, kPrescanPoints, false};
    }
    throw bracket_error("alpha residual has no root in [1, " +
                        std::to_string(bracket_hi) + "]");
  }

  double lo = root_lo, hi = root_hi;
  double f_lo = ctx.residual(lo);
  int iters = 0;
  for (; iters < kMaxBisection && hi - lo > kAlphaTol; ++iters) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = ctx.residual(mid);
    if (std::isnan(f_mid)) break;
    if (f_mid == 0.0) {
      lo = hi = mid;
      break;
    }
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  const double alpha_star = 0.5 * (lo + hi);
  const double theta_l = ctx.theta_of_alpha(alpha_star);
  return {theta_l,       alpha_star, ctx.n_at(theta_l),
          bracket_hi,    iters,      sign_changes > 1};
}

}  // namespace

NaturalParam right_minimizer(const TemFamily& fam, const WeightedPopulation& pop) {
  pop.validate();
  const std::size_t d = pop.dim();
  std::vector<double> out(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    const AxisSlice s = slice_axis(pop, a);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.thetas.size(); ++i) {
      acc += s.weights[i] * s.thetas[i] / fam.conformal_factor(s.thetas[i]);
    }
    out[a] = acc;
  }
  return NaturalParam{std::move(out)};
}

LeftMinimizerResult left_minimizer(const TemFamily& fam,
                                   const WeightedPopulation& pop) {
  pop.validate();
  const std::size_t d = pop.dim();
  LeftMinimizerResult res;
  res.theta_l.theta.resize(d);
  res.axes.reserve(d);
  for (std::size_t a = 0; a < d; ++a) {
    const AxisSlice s = slice_axis(pop, a);
    LeftAxisResult axis = solve_left_axis(fam, s);
    const auto [mn, mx] = std::minmax_element(s.thetas.begin(), s.thetas.end());
    if (axis.theta_l < *mn || axis.theta_l > *mx) res.bounding_violated = true;
    res.theta_l[a] = axis.theta_l;
    res.axes.push_back(axis);
  }
  return res;
}

double alpha_residual(const TemFamily& fam, const WeightedPopulation& pop,
                      double alpha, std::size_t axis) {
  pop.validate();
  const AxisSlice s = slice_axis(pop, axis);
  const LeftContext ctx = make_left_context(fam, s);
  double theta;
  try {
    theta = ctx.theta_of_alpha(alpha);
  } catch (const domain_error&) {
    throw domain_error("alpha * E[grad G] leaves the gradient image at alpha = " +
                       std::to_string(alpha));
  }
  const double n = ctx.n_at(theta);
  if (n == 0.0) throw domain_error("N(theta(alpha)) vanishes");
  return alpha - ctx.d_at(theta) / n;
}

NaturalParam influence_probe(const TemFamily& fam, const WeightedPopulation& pop,
                             const NaturalParam& outlier, double eps, Side side) {
  pop.validate();
  if (eps < 0.0 || eps >= 1.0) throw domain_error("influence: eps must be in [0,1)");
  if (outlier.dim() != pop.dim()) throw domain_error("influence: dimension mismatch");

  WeightedPopulation mixed = pop;
  for (double& w : mixed.weights) w *= 1.0 - eps;
  mixed.points.push_back(outlier);
  mixed.weights.push_back(eps);

  NaturalParam before, after;
  if (side == Side::left) {
    before = left_minimizer(fam, pop).theta_l;
    after = left_minimizer(fam, mixed).theta_l;
  } else {
    before = right_minimizer(fam, pop);
    after = right_minimizer(fam, mixed);
  }
  std::vector<double> disp(before.dim());
  for (std::size_t i = 0; i < disp.size(); ++i) disp[i] = after[i] - before[i];
  return NaturalParam{std::move(disp)};
}

}  // namespace tem
