#pragma once

#include <stdexcept>
#include <string>

namespace tem {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
public:
  explicit domain_error(const std::string& what) : error(what) {}
};

/// Adaptive quadrature failed to reach the requested tolerance.
/// Carries the residual (error estimate) actually achieved.
class quadrature_error : public error {
public:
  quadrature_error(const std::string& what, double residual)
      : error(what + " (achieved residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

/// The alpha line search found no residual root inside its bracket.
class bracket_error : public error {
public:
  explicit bracket_error(const std::string& what) : error(what) {}
};

/// N(theta) <= 0 throughout the line-search bracket.
class n_nonpositive_error : public error {
public:
  explicit n_nonpositive_error(const std::string& what) : error(what) {}
};

/// Pixel-radius calibration failed (divergence not monotone along the ray).
class calibration_error : public error {
public:
  explicit calibration_error(const std::string& what) : error(what) {}
};

/// Rejection sampling exceeded its stall limit.
class sampling_error : public error {
public:
  explicit sampling_error(const std::string& what) : error(what) {}
};

/// Filesystem failure, annotated with the offending path.
class io_error : public error {
public:
  io_error(const std::string& what, const std::string& path)
      : error(what + ": " + path) {}
};

}  // namespace tem
