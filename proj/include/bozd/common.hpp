#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bozd {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Failure categories. The CLI maps them onto exit codes 2, 3 and 4.
enum class ErrorKind { Validation, RegimeRefusal, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad input: out-of-range parameters, Im z <= 0, malformed files.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::Validation, what) {}
};

/// The request lies outside the regime where the formulas are guaranteed
/// (linear-growth data past 1/(2C), branch formula on non-C1 data, ...).
class RegimeRefusal : public Error {
 public:
  explicit RegimeRefusal(const std::string& what)
      : Error(ErrorKind::RegimeRefusal, what) {}
};

/// A numerical procedure could not certify its own result.
class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

struct Tolerances {
  double quadrature = 1e-9;
  double consistency = 1e-7;
  double tail = 1e-6;
  double window = 1e-4;
  double solve = 1e-10;
  double cross_pde = 1e-3;
  double cross_formula = 1e-6;
  double root = 1e-12;
  double simple = 1e-6;
  double recon = 1e-3;
  /// crit_tol = crit_scale * (1 + |t|)
  double crit_scale = 1e-3;
};

}  // namespace bozd
