#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tem/deformed_math.hpp"
#include "tem/quadrature.hpp"

namespace tem {

/// Natural parameter vector; one coordinate per axis. 1D families apply
/// coordinate-wise, so d-dimensional use is a product of per-axis members.
struct NaturalParam {
  std::vector<double> theta;

  NaturalParam() = default;
  explicit NaturalParam(std::vector<double> v) : theta(std::move(v)) {}
  static NaturalParam scalar(double v) { return NaturalParam{{v}}; }
  static NaturalParam of(double x, double y) { return NaturalParam{{x, y}}; }

  std::size_t dim() const { return theta.size(); }
  double& operator[](std::size_t i) { return theta[i]; }
  double operator[](std::size_t i) const { return theta[i]; }
  bool operator==(const NaturalParam&) const = default;
};

/// Expectation parameter vector, hbar = grad G_t(theta) coordinate-wise.
struct ExpectationParam {
  std::vector<double> hbar;

  ExpectationParam() = default;
  explicit ExpectationParam(std::vector<double> v) : hbar(std::move(v)) {}
  static ExpectationParam scalar(double v) { return ExpectationParam{{v}}; }

  std::size_t dim() const { return hbar.size(); }
  double& operator[](std::size_t i) { return hbar[i]; }
  double operator[](std::size_t i) const { return hbar[i]; }
};

struct Interval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
};

enum class FamilyKind { t_exponential, t_gaussian_mu0, quadrature_generic };

std::string to_string(FamilyKind k);
FamilyKind family_kind_from_string(const std::string& s);

/// A 1D tempered exponential measure family at fixed temper t.
///
/// The unnormalized density is p(x) = exp_t(theta phi(x) (-)_t G_t(theta));
/// its co-density p^{1/t*} integrates to 1 against the base measure, which
/// has density measure_scale() with respect to Lebesgue on the support.
/// All per-axis operations are scalar; vector overloads apply them
/// coordinate-wise and sum where a scalar is produced.
///
/// Instances are immutable after construction and safe for concurrent reads.
class TemFamily {
public:
  virtual ~TemFamily() = default;

  virtual FamilyKind kind() const = 0;
  const Temper& temper() const { return tp_; }

  /// Short tag describing the sufficient statistic ("x", "x^2", ...).
  virtual std::string sufficient_statistic() const = 0;

  /// Cumulant G_t(theta) = (log_t)* of integral (exp_t)*(theta phi) dxi.
  virtual double cumulant(double theta) const = 0;
  /// hbar = dG_t/dtheta.
  virtual double grad_cumulant(double theta) const = 0;
  /// Functional inverse of grad_cumulant.
  virtual double inv_grad_cumulant(double hbar) const = 0;
  /// Convex conjugate G*_t(hbar); satisfies the Legendre identity
  /// G*(hbar) = theta hbar - G(theta) at theta = inv_grad_cumulant(hbar).
  virtual double conjugate(double hbar) const = 0;

  /// Interval where the density is positive, for this theta.
  virtual Interval support(double theta) const = 0;
  /// Support truncated for quadrature; equals support() for t < 1 and clips
  /// the classical infinite tail where the integrand is below 1e-16 of its
  /// peak for t = 1.
  virtual Interval quad_interval(double theta) const = 0;
  virtual Interval natural_domain() const = 0;
  /// Density of the base measure xi with respect to Lebesgue.
  virtual double measure_scale() const = 0;
  virtual double phi(double x) const = 0;

  /// Natural parameter from the source parameter (lambda or sigma^2).
  virtual double source_to_natural(double source) const;
  virtual double natural_to_source(double theta) const;

  /// Closed-form conformal divergence when the family has one.
  virtual std::optional<double> conformal_closed_form(double theta_hat,
                                                      double theta) const {
    return std::nullopt;
  }
  /// Closed-form weighted left/right population minimizers when available.
  virtual std::optional<double> left_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const {
    return std::nullopt;
  }
  virtual std::optional<double> right_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const {
    return std::nullopt;
  }

  /// Unnormalized TEM density; 0 outside the support.
  double density(double theta, double x) const;
  /// Conformal factor D_t(theta) = 1 + (1-t) G_t(theta) = exp_t^{1-t}(G_t).
  double conformal_factor(double theta) const;
  /// Total mass via Lemma form 1 + (1-t)(G - theta hbar).
  double total_mass(double theta) const;
  /// Total mass via the dual form 1 + (1-t)(-G*(hbar)).
  double total_mass_dual(double theta) const;

  // Coordinate-wise vector wrappers.
  double cumulant(const NaturalParam& th) const;
  ExpectationParam grad_cumulant(const NaturalParam& th) const;
  NaturalParam inv_grad_cumulant(const ExpectationParam& hb) const;
  double conjugate(const ExpectationParam& hb) const;

  /// Throws domain_error unless theta is in the natural domain
  /// (with a 1e-12 margin at finite endpoints).
  void require_natural(double theta) const;

  /// Serializable descriptor {kind, t, source_param}.
  nlohmann::json descriptor() const;
  std::optional<double> descriptor_source_param() const { return source_param_; }

protected:
  explicit TemFamily(Temper tp, std::optional<double> source_param = std::nullopt)
      : tp_(tp), source_param_(source_param) {}

  Temper tp_;
  std::optional<double> source_param_;
};

using FamilyPtr = std::shared_ptr<const TemFamily>;

/// 1D t-exponential family: phi(x) = x, natural domain theta < 0,
/// support [0, (3-2t)/((1-t) lambda)], base measure (3-2t) dx.
class TExponentialFamily final : public TemFamily {
public:
  explicit TExponentialFamily(Temper tp, std::optional<double> source_param = std::nullopt);

  FamilyKind kind() const override { return FamilyKind::t_exponential; }
  std::string sufficient_statistic() const override { return "x"; }

  double cumulant(double theta) const override;
  double grad_cumulant(double theta) const override;
  double inv_grad_cumulant(double hbar) const override;
  double conjugate(double hbar) const override;

  Interval support(double theta) const override;
  Interval quad_interval(double theta) const override;
  Interval natural_domain() const override;
  double measure_scale() const override { return 3.0 - 2.0 * tp_.t; }
  double phi(double x) const override { return x; }

  double source_to_natural(double lambda) const override;
  double natural_to_source(double theta) const override;

  std::optional<double> conformal_closed_form(double theta_hat,
                                              double theta) const override;
  std::optional<double> left_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const override;
  std::optional<double> right_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const override;
};

/// 1D t-Gaussian (mu = 0) family: phi(x) = x^2, natural domain theta < 0,
/// support |x| <= 1/sqrt((1-t)(-theta)), Lebesgue base measure.
class TGaussianMu0Family final : public TemFamily {
public:
  explicit TGaussianMu0Family(Temper tp, std::optional<double> source_param = std::nullopt);

  FamilyKind kind() const override { return FamilyKind::t_gaussian_mu0; }
  std::string sufficient_statistic() const override { return "x^2"; }

  double cumulant(double theta) const override;
  double grad_cumulant(double theta) const override;
  double inv_grad_cumulant(double hbar) const override;
  double conjugate(double hbar) const override;

  Interval support(double theta) const override;
  Interval quad_interval(double theta) const override;
  Interval natural_domain() const override;
  double measure_scale() const override { return 1.0; }
  double phi(double x) const override { return x * x; }

  double source_to_natural(double sigma2) const override;
  double natural_to_source(double theta) const override;

  std::optional<double> conformal_closed_form(double theta_hat,
                                              double theta) const override;
  std::optional<double> left_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const override;
  std::optional<double> right_minimizer_closed(
      std::span<const double> thetas, std::span<const double> weights) const override;

  /// Normalizer constant c_t from the closed-form cumulant, evaluated at the
  /// dual temper (log-Gamma based; c_1 = sqrt(pi)).
  static double c_constant(double t);

private:
  double c_dual_;     // c_{t*}
  double a_const_;    // c_{t*} sqrt(t*)
};

/// Shape data a quadrature-backed family needs about a TEM.
struct FamilyShape {
  std::function<double(double)> phi;
  std::function<Interval(double theta)> support;
  std::function<Interval(double theta)> quad_interval;
  Interval natural_domain;
  double measure_scale = 1.0;
  std::string statistic_tag = "x";
};

/// Generic family whose every operation is computed by adaptive quadrature
/// from the defining integrals (cumulant by Theorem-1 integral, hbar by
/// integral of phi against the density, inverse gradient by bisection,
/// conjugate by the Legendre identity). Used as the independent oracle for
/// the closed-form families, and for TEMs with no closed form.
class QuadratureFamily final : public TemFamily {
public:
  QuadratureFamily(Temper tp, FamilyShape shape);

  /// Oracle with the same shape (statistic, support, base measure) as f.
  static std::shared_ptr<QuadratureFamily> oracle_for(const TemFamily& f);

  /// TEM with phi(x) = x on the fixed support [lo, hi], Lebesgue measure.
  /// Its cumulant grows linearly as theta -> +inf, which makes the
  /// right population minimizer's influence function bounded there.
  static std::shared_ptr<QuadratureFamily> fixed_support(Temper tp, double lo,
                                                         double hi);

  FamilyKind kind() const override { return FamilyKind::quadrature_generic; }
  std::string sufficient_statistic() const override { return shape_.statistic_tag; }

  double cumulant(double theta) const override;
  double grad_cumulant(double theta) const override;
  double inv_grad_cumulant(double hbar) const override;
  double conjugate(double hbar) const override;

  Interval support(double theta) const override { return shape_.support(theta); }
  Interval quad_interval(double theta) const override {
    return shape_.quad_interval(theta);
  }
  Interval natural_domain() const override { return shape_.natural_domain; }
  double measure_scale() const override { return shape_.measure_scale; }
  double phi(double x) const override { return shape_.phi(x); }

private:
  double cumulant_uncached(double theta) const;

  FamilyShape shape_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<double, double> cumulant_cache_;
};

/// Factory from a JSON descriptor {kind, t, source_param}.
FamilyPtr make_family(const nlohmann::json& descriptor);
FamilyPtr make_family(FamilyKind kind, double t,
                      std::optional<double> source_param = std::nullopt);

}  // namespace tem
