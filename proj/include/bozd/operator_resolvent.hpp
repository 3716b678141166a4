#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bozd/hardy.hpp"

namespace bozd {

/// Discretization controls shared by every formula evaluation.
struct FormulaNumerics {
  double xi_max = 40.0;
  int m = 2048;
  /// Half-width of the window used to check that u0 is L2 on the line.
  double window = 1000.0;
  /// Order of the one-sided stencil for G and of the interpolant used by
  /// the Toeplitz product integration.
  int order = 6;
  int gauss_points = 12;
  /// Nodes used by the I_+ extrapolation; 0 reads the stored 0+ node.
  int iplus_q = 0;
  int refinement_steps = 2;
  /// Largest accepted h * |Re z + 2 eps t xi| on the grid, and largest
  /// h * |c| over the feature centres c of u0.
  double phase_limit = 1.0;
  double memory_cap_bytes = 3.0 * 1024.0 * 1024.0 * 1024.0;
  Tolerances tol{};
};

/// Smallest xi_max at which |u0^| has decayed to `rel` of its peak,
/// padded by 25% and floored at 40.
double suggest_xi_max(const RealLineFunction& u0, double rel = 1e-12);

struct GeneratorSpec {
  RealLineFunction u0;
  double t = 0.0;
  /// Dispersion in [0, 1]: 1 gives the Benjamin-Ono generator, 0 the
  /// zero-dispersion one.
  double eps = 1.0;
  FrequencyGrid grid;

  void validate() const;
};

struct ResolventSolve {
  double t = 0.0;
  double eps = 0.0;
  cplx z{};
  HardyFunction w;
  /// ||(A - z) w - rhs|| / ||rhs||
  double residual = 0.0;
  /// Reciprocal condition estimate of A - z.
  double rcond = 0.0;
};

/// A formula value with the solve diagnostics that produced it.
struct FormulaValue {
  cplx z{};
  cplx value{};
  double residual = 0.0;
  double rcond = 0.0;
  std::string method;
};

/// Caches what depends only on (u0, grid): Pi u0, the Toeplitz matrix of
/// u0 and the growth constant. Safe to share between threads.
class FormulaContext {
 public:
  FormulaContext(RealLineFunction u0, FormulaNumerics num = {});

  const RealLineFunction& u0() const noexcept { return u0_; }
  const FrequencyGrid& grid() const noexcept { return grid_; }
  const FormulaNumerics& numerics() const noexcept { return num_; }

  const HardyFunction& pi_u0() const;
  const Eigen::MatrixXcd& toeplitz() const;
  /// sup |u0(x)| / <x> over the sampling window.
  double growth_constant() const;

  /// [G] - 2 eps t [D] + 2 t [T_u0].
  Eigen::MatrixXcd assemble(double t, double eps) const;
  ResolventSolve resolve(double t, double eps, const UpperHalfPoint& z,
                         const HardyFunction& rhs) const;
  /// (1/2i pi) I_+ of the solve with rhs = Pi u0.
  FormulaValue formula(double t, double eps, const UpperHalfPoint& z) const;

  /// Throws RegimeRefusal for linear-growth data with 2|t| C >= 1.
  void check_growth_regime(double t) const;
  /// Throws ValidationError when the grid cannot resolve the phase of the
  /// resolvent at z or the oscillation that off-centre features of u0 put
  /// into the transforms.
  void check_phase(double t, double eps, const UpperHalfPoint& z) const;

 private:
  RealLineFunction u0_;
  FormulaNumerics num_;
  FrequencyGrid grid_;
  mutable std::once_flag pi_once_, toeplitz_once_, growth_once_;
  mutable std::optional<HardyFunction> pi_u0_;
  mutable Eigen::MatrixXcd toeplitz_;
  mutable double growth_ = 0.0;
};

Eigen::MatrixXcd assemble_generator(const GeneratorSpec& spec, const FormulaNumerics& num = {});
ResolventSolve resolve(const GeneratorSpec& spec, const UpperHalfPoint& z, const HardyFunction& rhs,
                       const FormulaNumerics& num = {});

/// Holomorphic extension Pi u(t, z) of the Benjamin-Ono solution.
FormulaValue pi_u_explicit(const FormulaContext& ctx, double t, const UpperHalfPoint& z);
FormulaValue pi_u_explicit(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                           const FormulaNumerics& num = {});

/// Zero-dispersion operator formula.
FormulaValue zd_operator(const FormulaContext& ctx, double t, const UpperHalfPoint& z);
FormulaValue zd_operator(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                         const FormulaNumerics& num = {});

/// Samples of the transform of u(y) / (y - z) at start + k h, k < count,
/// by backward recursion of i int_xi^inf e^{iz(eta - xi)} u^(eta) d eta.
std::vector<cplx> pole_divided_transform(const LineFunction& u, cplx z, double start, double h,
                                         int count);

/// sup_y |u0(y)| / |y - z|
double sup_fz(const RealLineFunction& u0, const UpperHalfPoint& z);

struct NeumannResult {
  cplx value{};
  /// |(-2t)^(n-1) term_n| for n = 1..n_max
  std::vector<double> term_magnitudes;
  /// 2 |t| ||f_z||_inf
  double contraction = 0.0;
  /// Largest ratio of successive term magnitudes past the first term.
  double observed_ratio = 0.0;
};

/// Partial sum of the Neumann expansion of the zero-dispersion formula.
NeumannResult neumann_zd(const FormulaContext& ctx, double t, const UpperHalfPoint& z, int n_max);
NeumannResult neumann_zd(const RealLineFunction& u0, double t, const UpperHalfPoint& z, int n_max,
                         const FormulaNumerics& num = {});

struct TermReduction {
  /// int f_z T_{f_z}^{n-2} Pi f_z dy by grid operators
  cplx lhs{};
  /// (1/n) int f_z^n dy by quadrature
  cplx rhs{};
  double rel_err = 0.0;
};

TermReduction term_reduction_check(const FormulaContext& ctx, double t, const UpperHalfPoint& z,
                                   int n);
TermReduction term_reduction_check(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                                   int n, const FormulaNumerics& num = {});

struct BoundaryTrace {
  std::vector<double> x;
  std::vector<cplx> values;
  /// Trapezoid L2 norm of the trace over the x range.
  double trace_norm = 0.0;
  /// ||Pi u0||
  double reference_norm = 0.0;
  double max_residual = 0.0;
};

/// z -> (1/2i pi) I_+((A - z)^{-1} Pi u0) along z = x + i delta.
BoundaryTrace boundary_trace(const FormulaContext& ctx, double t, double eps, double delta,
                             const std::vector<double>& x);

struct CauchyReport {
  /// |f(c) - mean of f over the circle|
  double mean_value_residual = 0.0;
  /// |closed contour integral of f| / (2 pi r)
  double contour_residual = 0.0;
  /// max |f| on the circle, for scaling
  double scale = 0.0;
};

/// Discrete Cauchy tests on the circle |z - c| = r with n trapezoid nodes.
CauchyReport cauchy_check(const std::function<cplx(cplx)>& f, cplx center, double radius,
                          int n = 32);

/// Per-z CSV rows: re_z, im_z, re_val, im_val, residual, method.
void write_formula_csv(std::ostream& os, const std::vector<FormulaValue>& rows);

}  // namespace bozd
