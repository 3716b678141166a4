#pragma once

#include <functional>
#include <cmath>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bozd/common.hpp"
#include "bozd/line_function.hpp"

namespace bozd {

/// Uniform grid xi_j = j * h on [0, xi_max], h = xi_max / (m - 1).
class FrequencyGrid {
 public:
  static constexpr int kMinNodes = 64;

  FrequencyGrid(double xi_max, int m);

  double xi_max() const noexcept { return xi_max_; }
  int m() const noexcept { return m_; }
  double h() const noexcept { return h_; }
  double node(int j) const noexcept { return h_ * j; }
  std::vector<double> nodes() const;

  /// Trapezoid weights with Gregory end corrections (exact for polynomials
  /// of degree < 7 near each end).
  const std::vector<double>& weights() const noexcept { return *weights_; }

  bool operator==(const FrequencyGrid& o) const noexcept {
    return xi_max_ == o.xi_max_ && m_ == o.m_;
  }

 private:
  double xi_max_;
  int m_;
  double h_;
  std::shared_ptr<const std::vector<double>> weights_;
};

/// Element of L2_+ stored as samples of its Fourier transform on a
/// FrequencyGrid. values[0] holds the limit from the right at 0.
class HardyFunction {
 public:
  explicit HardyFunction(const FrequencyGrid& grid);
  HardyFunction(const FrequencyGrid& grid, Eigen::VectorXcd values);

  /// Sample a transform xi -> f^(xi) on the grid.
  static HardyFunction from_fourier(const FrequencyGrid& grid,
                                    const std::function<cplx(double)>& fhat);

  const FrequencyGrid& grid() const noexcept { return grid_; }
  const Eigen::VectorXcd& values() const noexcept { return values_; }
  Eigen::VectorXcd& values() noexcept { return values_; }
  cplx operator[](int j) const { return values_[j]; }

  /// ||f||^2 = (1/2pi) int |f^|^2.
  double norm_sq() const;
  double norm() const { return std::sqrt(norm_sq()); }
  /// |f^(xi_max)| / max |f^|; 0 for the zero function.
  double tail_ratio() const;
  bool is_zero() const { return values_.isZero(0.0); }

  /// Boundary value f(x) for real x.
  cplx boundary_value(double x) const;

  HardyFunction operator+(const HardyFunction& o) const;
  HardyFunction operator-(const HardyFunction& o) const;
  HardyFunction operator*(cplx s) const;

  void write_csv(std::ostream& os) const;
  static HardyFunction read_csv(std::istream& is);

 private:
  FrequencyGrid grid_;
  Eigen::VectorXcd values_;
};

/// <f|g> = (1/2pi) int f^ conj(g^).
cplx inner(const HardyFunction& f, const HardyFunction& g);

/// Point of the open upper half-plane.
class UpperHalfPoint {
 public:
  explicit UpperHalfPoint(cplx z);
  UpperHalfPoint(double re, double im) : UpperHalfPoint(cplx(re, im)) {}
  cplx value() const noexcept { return z_; }
  double real() const noexcept { return z_.real(); }
  double imag() const noexcept { return z_.imag(); }
  operator cplx() const noexcept { return z_; }

 private:
  cplx z_;
};

/// Weights c_k with f'(0) ~ sum_k c_k f(k) / h, k = 0..order.
std::vector<double> forward_difference_weights(int order);

/// int_{|x| > window} u^2 relative to ||u||^2.
double window_tail_fraction(const RealLineFunction& u, double window);

/// Szego projection of real data. Throws ValidationError when the window
/// misses more than window_tol of the L2 mass and NumericalFailure when
/// the transform has not decayed to tail_tol at xi_max.
HardyFunction project_szego(const RealLineFunction& u, const FrequencyGrid& grid, double window,
                            const Tolerances& tol = {});
/// Complex path: keep the nonnegative frequencies of an arbitrary function.
HardyFunction project_szego(const LineFunction& u, const FrequencyGrid& grid,
                            const Tolerances& tol = {});

/// f^(0+) extrapolated with the degree q-1 polynomial through xi_1..xi_q.
cplx i_plus(const HardyFunction& f, int q = 3);

HardyFunction apply_G(const HardyFunction& f, int order = 2);
HardyFunction apply_D(const HardyFunction& f);

struct ToeplitzDiagnostics {
  /// max(|b^(xi_max)|, |b^(-xi_max)|) / max |b^|
  double symbol_tail = 0.0;
  /// tail ratio of the output
  double product_tail = 0.0;
};

/// Matrix of f -> Pi(b f) on the grid, by product integration: on each
/// cell f^ is replaced by its degree-`order` interpolant and integrated
/// against b^(xi - eta) with Gauss-Legendre.
Eigen::MatrixXcd toeplitz_matrix(const std::function<cplx(double)>& bhat, const FrequencyGrid& grid,
                                 int order = 6, int gauss_points = 12);

/// Same matrix from precomputed symbol samples
///   B[(d + m - 2) * Q + q] = b^((d - s_q) h),  d = -(m-2)..m-1,
/// where s_q are the Gauss-Legendre nodes on [0, 1].
Eigen::MatrixXcd toeplitz_matrix_from_samples(const std::vector<cplx>& B, const FrequencyGrid& grid,
                                              int order, int gauss_points);

/// max(|b^(+-xi_max)|) / max_{|xi| <= xi_max} |b^|, sampled on the grid.
double symbol_tail_ratio(const std::function<cplx(double)>& bhat, const FrequencyGrid& grid);

HardyFunction toeplitz_apply(const RealLineFunction& b, const HardyFunction& f,
                             const Tolerances& tol = {}, int order = 6,
                             ToeplitzDiagnostics* diag = nullptr);
HardyFunction toeplitz_apply(const LineFunction& b, const HardyFunction& f,
                             const Tolerances& tol = {}, int order = 6,
                             ToeplitzDiagnostics* diag = nullptr);

struct ResolventOptions {
  int order = 6;
  int gauss_points = 12;
  /// Cross-check against (f(x) - f(z)) / (x - z) at a few real x.
  bool validate = true;
  Tolerances tol{};
};

/// (G - z)^{-1} f: w^(xi) = i int_xi^inf e^{iz(eta - xi)} f^(eta) d eta,
/// integrated downward from xi_max.
HardyFunction resolvent_G(const UpperHalfPoint& z, const HardyFunction& f,
                          const ResolventOptions& opt = {});

enum class EvalRoute { Direct, Resolvent };

/// Holomorphic extension f(z) = (1/2pi) int_0^inf e^{iz xi} f^(xi) d xi, or
/// (1/2i pi) I_+((G - z)^{-1} f) with the Resolvent route.
cplx eval_upper_half(const HardyFunction& f, const UpperHalfPoint& z,
                     EvalRoute route = EvalRoute::Direct, int q = 7);

}  // namespace bozd
