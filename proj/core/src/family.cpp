#include "tem/family.hpp"

#include <cmath>

#include <json.hpp>

#include "tem/errors.hpp"

namespace tem {

namespace {
// Classical tails are truncated for quadrature where the integrand falls
// below 1e-16 of its peak; exp(-40) leaves margin under that.
constexpr double kTailCut = 40.0;
constexpr double kDomainMargin = 1e-12;
}  // namespace

std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::t_exponential: return "t_exponential";
    case FamilyKind::t_gaussian_mu0: return "t_gaussian_mu0";
    case FamilyKind::quadrature_generic: return "quadrature_generic";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& s) {
  if (s == "t_exponential") return FamilyKind::t_exponential;
  if (s == "t_gaussian_mu0") return FamilyKind::t_gaussian_mu0;
  if (s == "quadrature_generic") return FamilyKind::quadrature_generic;
  throw domain_error("unknown family kind: " + s);
}

// ---------------------------------------------------------------------------
// TemFamily common operations
// ---------------------------------------------------------------------------

double TemFamily::source_to_natural(double) const {
  throw domain_error("family has no source parameterization");
}

double TemFamily::natural_to_source(double) const {
  throw domain_error("family has no source parameterization");
}

double TemFamily::density(double theta, double x) const {
  require_natural(theta);
  const Interval sup = support(theta);
  if (x < sup.lo || x > sup.hi) return 0.0;
  const double g = cumulant(theta);
  const double u = t_sub(tp_, theta * phi(x), g);
  if (!tp_.classical()) {
    // Clamp the rounding fuzz at the support edge to an exact zero.
    if (1.0 + (1.0 - tp_.t) * u < 1e-14) return 0.0;
  }
  return exp_t(tp_, u);
}

double TemFamily::conformal_factor(double theta) const {
  if (tp_.classical()) return 1.0;  // avoids 0 * inf for huge cumulants
  return 1.0 + (1.0 - tp_.t) * cumulant(theta);
}

double TemFamily::total_mass(double theta) const {
  if (tp_.classical()) {
    require_natural(theta);
    return 1.0;
  }
  const double g = cumulant(theta);
  const double hb = grad_cumulant(theta);
  return 1.0 + (1.0 - tp_.t) * (g - theta * hb);
}

double TemFamily::total_mass_dual(double theta) const {
  if (tp_.classical()) {
    require_natural(theta);
    return 1.0;
  }
  const double hb = grad_cumulant(theta);
  return 1.0 + (1.0 - tp_.t) * (-conjugate(hb));
}

double TemFamily::cumulant(const NaturalParam& th) const {
  double s = 0.0;
  for (double v : th.theta) s += cumulant(v);
  return s;
}

ExpectationParam TemFamily::grad_cumulant(const NaturalParam& th) const {
  std::vector<double> out(th.dim());
  for (std::size_t i = 0; i < th.dim(); ++i) out[i] = grad_cumulant(th[i]);
  return ExpectationParam{std::move(out)};
}

NaturalParam TemFamily::inv_grad_cumulant(const ExpectationParam& hb) const {
  std::vector<double> out(hb.dim());
  for (std::size_t i = 0; i < hb.dim(); ++i) out[i] = inv_grad_cumulant(hb[i]);
  return NaturalParam{std::move(out)};
}

double TemFamily::conjugate(const ExpectationParam& hb) const {
  double s = 0.0;
  for (double v : hb.hbar) s += conjugate(v);
  return s;
}

void TemFamily::require_natural(double theta) const {
  const Interval d = natural_domain();
  const bool lo_ok = std::isinf(d.lo) || theta >= d.lo + kDomainMargin;
  const bool hi_ok = std::isinf(d.hi) || theta <= d.hi - kDomainMargin;
  if (!(lo_ok && hi_ok) || !std::isfinite(theta)) {
    throw domain_error("natural parameter " + std::to_string(theta) +
                       " outside domain of " + to_string(kind()));
  }
}

nlohmann::json TemFamily::descriptor() const {
  nlohmann::json j;
  j["kind"] = to_string(kind());
  j["t"] = tp_.t;
  j["source_param"] = source_param_ ? nlohmann::json(*source_param_)
                                    : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// 1D t-exponential
// ---------------------------------------------------------------------------

TExponentialFamily::TExponentialFamily(Temper tp, std::optional<double> src)
    : TemFamily(tp, src) {}

double TExponentialFamily::cumulant(double theta) const {
  require_natural(theta);
  if (tp_.classical()) return -std::log(-theta);
  // G = ((-theta)^{t*-1} - 1)/(1-t), computed through expm1 for accuracy
  // as t -> 1.
  return std::expm1((tp_.t_star - 1.0) * std::log(-theta)) / (1.0 - tp_.t);
}

double TExponentialFamily::grad_cumulant(double theta) const {
  require_natural(theta);
  return tp_.t_star * std::pow(-theta, tp_.t_star - 2.0);
}

double TExponentialFamily::inv_grad_cumulant(double hbar) const {
  if (!(hbar > 0.0)) {
    throw domain_error("hbar outside the gradient image (must be positive)");
  }
  return -std::pow(tp_.t_star / hbar, 1.0 / (2.0 - tp_.t_star));
}

double TExponentialFamily::conjugate(double hbar) const {
  if (!(hbar > 0.0)) throw domain_error("conjugate: hbar must be positive");
  const double ts = tp_.t_star;
  return -ts * (log_deformed(1.0 / (2.0 - ts), hbar / ts) + 1.0);
}

Interval TExponentialFamily::support(double theta) const {
  require_natural(theta);
  if (tp_.classical()) {
    return {0.0, std::numeric_limits<double>::infinity()};
  }
  return {0.0, -1.0 / ((1.0 - tp_.t) * theta)};
}

Interval TExponentialFamily::quad_interval(double theta) const {
  if (tp_.classical()) return {0.0, kTailCut / (-theta)};
  return support(theta);
}

Interval TExponentialFamily::natural_domain() const {
  return {-std::numeric_limits<double>::infinity(), 0.0};
}

double TExponentialFamily::source_to_natural(double lambda) const {
  if (!(lambda > 0.0)) throw domain_error("source rate lambda must be positive");
  return -lambda / (3.0 - 2.0 * tp_.t);
}

double TExponentialFamily::natural_to_source(double theta) const {
  require_natural(theta);
  return -(3.0 - 2.0 * tp_.t) * theta;
}

std::optional<double> TExponentialFamily::conformal_closed_form(
    double theta_hat, double theta) const {
  require_natural(theta_hat);
  require_natural(theta);
  const double ts = tp_.t_star;
  const double r = theta_hat / theta;
  return ts * (std::pow(r, 2.0 - ts) - (2.0 - ts) * log_deformed(ts, r) - 1.0);
}

std::optional<double> TExponentialFamily::left_minimizer_closed(
    std::span<const double> thetas, std::span<const double> weights) const {
  const double ts = tp_.t_star;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    num += weights[i] * std::pow(-thetas[i], ts - 1.0);
    den += weights[i] * std::pow(-thetas[i], ts - 2.0);
  }
  return -num / den;
}

std::optional<double> TExponentialFamily::right_minimizer_closed(
    std::span<const double> thetas, std::span<const double> weights) const {
  const double ts = tp_.t_star;
  double acc = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    acc += weights[i] * std::pow(-thetas[i], 2.0 - ts);
  }
  return -acc;
}

// ---------------------------------------------------------------------------
// 1D t-Gaussian, mu = 0
// ---------------------------------------------------------------------------

double TGaussianMu0Family::c_constant(double t) {
  if (std::abs(1.0 - t) < 1e-9) return std::sqrt(M_PI);
  const double x = 1.0 / (1.0 - t);
  return std::sqrt(M_PI * x) * std::exp(std::lgamma(1.0 + x) - std::lgamma(1.5 + x));
}

TGaussianMu0Family::TGaussianMu0Family(Temper tp, std::optional<double> src)
    : TemFamily(tp, src),
      c_dual_(c_constant(tp.t_star)),
      a_const_(c_dual_ * std::sqrt(tp.t_star)) {}

double TGaussianMu0Family::cumulant(double theta) const {
  require_natural(theta);
  const double ts = tp_.t_star;
  return ts * log_deformed(ts, a_const_ / std::sqrt(-theta));
}

double TGaussianMu0Family::grad_cumulant(double theta) const {
  require_natural(theta);
  const double ts = tp_.t_star;
  return 0.5 * ts * std::pow(a_const_, 1.0 - ts) *
         std::pow(-theta, 0.5 * (ts - 3.0));
}

double TGaussianMu0Family::inv_grad_cumulant(double hbar) const {
  if (!(hbar > 0.0)) {
    throw domain_error("hbar outside the gradient image (must be positive)");
  }
  const double ts = tp_.t_star;
  const double base = 0.5 * ts * std::pow(a_const_, 1.0 - ts) / hbar;
  return -std::pow(base, 2.0 / (3.0 - ts));
}

double TGaussianMu0Family::conjugate(double hbar) const {
  if (!(hbar > 0.0)) throw domain_error("conjugate: hbar must be positive");
  const double ts = tp_.t_star;
  const double tss = 2.0 / (3.0 - ts);
  return -0.5 * ts * (log_deformed(tss, 2.0 * c_dual_ * c_dual_ * hbar) + 1.0);
}

Interval TGaussianMu0Family::support(double theta) const {
  require_natural(theta);
  if (tp_.classical()) {
    const double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};
  }
  const double s = 1.0 / std::sqrt((1.0 - tp_.t) * (-theta));
  return {-s, s};
}

Interval TGaussianMu0Family::quad_interval(double theta) const {
  if (tp_.classical()) {
    const double s = std::sqrt(kTailCut / (-theta));
    return {-s, s};
  }
  return support(theta);
}

Interval TGaussianMu0Family::natural_domain() const {
  return {-std::numeric_limits<double>::infinity(), 0.0};
}

double TGaussianMu0Family::source_to_natural(double sigma2) const {
  if (!(sigma2 > 0.0)) throw domain_error("source variance must be positive");
  return -tp_.t_star / (2.0 * sigma2);
}

double TGaussianMu0Family::natural_to_source(double theta) const {
  require_natural(theta);
  return -tp_.t_star / (2.0 * theta);
}

std::optional<double> TGaussianMu0Family::conformal_closed_form(
    double theta_hat, double theta) const {
  require_natural(theta_hat);
  require_natural(theta);
  const double ts = tp_.t_star;
  const double sq = std::sqrt(theta_hat / theta);
  return 0.5 * ts *
         (std::pow(sq, 3.0 - ts) - (3.0 - ts) * log_deformed(ts, sq) - 1.0);
}

std::optional<double> TGaussianMu0Family::left_minimizer_closed(
    std::span<const double> thetas, std::span<const double> weights) const {
  const double ts = tp_.t_star;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    num += weights[i] * std::pow(-thetas[i], 0.5 * (ts - 1.0));
    den += weights[i] * std::pow(-thetas[i], 0.5 * (ts - 3.0));
  }
  return -num / den;
}

std::optional<double> TGaussianMu0Family::right_minimizer_closed(
    std::span<const double> thetas, std::span<const double> weights) const {
  const double ts = tp_.t_star;
  double acc = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    acc += weights[i] * std::pow(-thetas[i], 0.5 * (3.0 - ts));
  }
  return -std::pow(a_const_, ts - 1.0) * acc;
}

// ---------------------------------------------------------------------------
// Quadrature-backed generic family
// ---------------------------------------------------------------------------

QuadratureFamily::QuadratureFamily(Temper tp, FamilyShape shape)
    : TemFamily(tp), shape_(std::move(shape)) {}

std::shared_ptr<QuadratureFamily> QuadratureFamily::oracle_for(const TemFamily& f) {
  // The shape closures only capture plain data copied out of f, so the
  // oracle does not keep f alive (and never calls back into it).
  FamilyShape shape;
  const Temper tp = f.temper();
  const FamilyKind kind = f.kind();
  shape.statistic_tag = f.sufficient_statistic();
  shape.measure_scale = f.measure_scale();
  shape.natural_domain = f.natural_domain();
  switch (kind) {
    case FamilyKind::t_exponential:
      shape.phi = [](double x) { return x; };
      shape.support = [tp](double theta) {
        if (tp.classical()) {
          return Interval{0.0, std::numeric_limits<double>::infinity()};
        }
        return Interval{0.0, -1.0 / ((1.0 - tp.t) * theta)};
      };
      shape.quad_interval = [tp](double theta) {
        if (tp.classical()) return Interval{0.0, kTailCut / (-theta)};
        return Interval{0.0, -1.0 / ((1.0 - tp.t) * theta)};
      };
      break;
    case FamilyKind::t_gaussian_mu0:
      shape.phi = [](double x) { return x * x; };
      shape.support = [tp](double theta) {
        if (tp.classical()) {
          const double inf = std::numeric_limits<double>::infinity();
          return Interval{-inf, inf};
        }
        const double s = 1.0 / std::sqrt((1.0 - tp.t) * (-theta));
        return Interval{-s, s};
      };
      shape.quad_interval = [tp](double theta) {
        if (tp.classical()) {
          const double s = std::sqrt(kTailCut / (-theta));
          return Interval{-s, s};
        }
        const double s = 1.0 / std::sqrt((1.0 - tp.t) * (-theta));
        return Interval{-s, s};
      };
      break;
    case FamilyKind::quadrature_generic:
      throw domain_error("oracle_for: family is already quadrature backed");
  }
  return std::make_shared<QuadratureFamily>(tp, std::move(shape));
}

std::shared_ptr<QuadratureFamily> QuadratureFamily::fixed_support(Temper tp,
                                                                  double lo,
                                                                  double hi) {
  if (!(hi > lo)) throw domain_error("fixed_support: empty interval");
  FamilyShape shape;
  shape.phi = [](double x) { return x; };
  shape.support = [lo, hi](double) { return Interval{lo, hi}; };
  shape.quad_interval = shape.support;
  shape.natural_domain = {-std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
  shape.measure_scale = 1.0;
  shape.statistic_tag = "x";
  return std::make_shared<QuadratureFamily>(tp, std::move(shape));
}

double QuadratureFamily::cumulant_uncached(double theta) const {
  require_natural(theta);
  const Interval iv = shape_.quad_interval(theta);
  const double scale = shape_.measure_scale;
  const auto& phi = shape_.phi;
  const Temper tp = tp_;
  const double integral = integrate(
      [&](double x) { return scale * exp_t_star(tp, theta * phi(x)); }, iv.lo,
      iv.hi);
  if (!(integral > 0.0)) {
    throw domain_error("cumulant integral vanishes at theta = " +
                       std::to_string(theta));
  }
  return log_t_star(tp_, integral);
}

double QuadratureFamily::cumulant(double theta) const {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cumulant_cache_.find(theta);
    if (it != cumulant_cache_.end()) return it->second;
  }
  const double g = cumulant_uncached(theta);
  std::lock_guard lock(cache_mutex_);
  cumulant_cache_.emplace(theta, g);
  return g;
}

double QuadratureFamily::grad_cumulant(double theta) const {
  const double g = cumulant(theta);
  const Interval iv = shape_.quad_interval(theta);
  const double scale = shape_.measure_scale;
  const auto& phi = shape_.phi;
  const Temper tp = tp_;
  // hbar is the phi-moment of the (unnormalized) TEM density.
  return integrate(
      [&](double x) {
        const double p = phi(x);
        return scale * p * exp_t(tp, t_sub(tp, theta * p, g));
      },
      iv.lo, iv.hi);
}

double QuadratureFamily::inv_grad_cumulant(double hbar) const {
  if (!std::isfinite(hbar)) throw domain_error("inv_grad_cumulant: hbar not finite");
  const Interval dom = shape_.natural_domain;
  // Bracket by doubling; grad_cumulant is strictly increasing in theta.
  double lo, hi;
  if (std::isinf(dom.lo) && std::isinf(dom.hi)) {
    lo = -1.0;
    hi = 1.0;
    int guard = 0;
    while (grad_cumulant(hi) < hbar) {
      hi *= 2.0;
      if (++guard > 200) throw domain_error("hbar above the gradient image");
    }
    guard = 0;
    while (true) {
      bool below = false;
      try {
        below = grad_cumulant(lo) <= hbar;
      } catch (const domain_error&) {
        // cumulant integral vanished: theta fell off the effective domain.
        lo *= 0.5;
        if (++guard > 200) throw domain_error("hbar below the gradient image");
        continue;
      }
      if (below) break;
      lo *= 2.0;
      if (++guard > 200) throw domain_error("hbar below the gradient image");
    }
  } else if (dom.hi == 0.0) {
    // Negative half-line: gradient goes to +inf toward 0- and to 0 at -inf.
    hi = -1.0;
    int guard = 0;
    while (grad_cumulant(hi) < hbar) {
      hi *= 0.5;
      if (++guard > 200) throw domain_error("hbar above the gradient image");
    }
    lo = hi;
    guard = 0;
    while (grad_cumulant(lo) > hbar) {
      lo *= 2.0;
      if (++guard > 200) throw domain_error("hbar below the gradient image");
    }
  } else {
    throw domain_error("inv_grad_cumulant: unsupported natural domain");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (grad_cumulant(mid) < hbar) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

double QuadratureFamily::conjugate(double hbar) const {
  const double theta = inv_grad_cumulant(hbar);
  return theta * hbar - cumulant(theta);
}

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

FamilyPtr make_family(FamilyKind kind, double t, std::optional<double> source_param) {
  const Temper tp = Temper::of(t);
  switch (kind) {
    case FamilyKind::t_exponential:
      return std::make_shared<TExponentialFamily>(tp, source_param);
    case FamilyKind::t_gaussian_mu0:
      return std::make_shared<TGaussianMu0Family>(tp, source_param);
    case FamilyKind::quadrature_generic:
      throw domain_error(
          "quadrature_generic families are built in code, not from descriptors");
  }
  throw domain_error("unknown family kind");
}

FamilyPtr make_family(const nlohmann::json& descriptor) {
  const FamilyKind kind =
      family_kind_from_string(descriptor.at("kind").get<std::string>());
  const double t = descriptor.at("t").get<double>();
  std::optional<double> src;
  if (descriptor.contains("source_param") && !descriptor["source_param"].is_null()) {
    src = descriptor["source_param"].get<double>();
  }
  return make_family(kind, t, src);
}

}  // namespace tem
