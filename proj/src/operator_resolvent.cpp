#include "bozd/operator_resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bozd/quadrature.hpp"

namespace bozd {

namespace {

double scan_window(const RealLineFunction& u0, double extra = 0.0) {
  return std::max({4.0 * u0.line().hints().extent, 50.0, extra});
}

/// (1/2pi) sum_j w_j a_j b_j
cplx pair(const FrequencyGrid& grid, const std::vector<cplx>& a, const Eigen::VectorXcd& b) {
  const auto& w = grid.weights();
  cplx acc{};
  for (int j = 0; j < grid.m(); ++j) acc += w[j] * a[j] * b[j];
  return acc / (2.0 * kPi);
}

/// Everything the Neumann route needs for one z.
struct PoleDivided {
  std::vector<cplx> at_nodes;     // f_z^(xi_j)
  std::vector<cplx> at_negative;  // f_z^(-xi_j)
  Eigen::MatrixXcd toeplitz;      // [T_{f_z}]
};

PoleDivided pole_divided(const FormulaContext& ctx, const UpperHalfPoint& z) {
  const auto& grid = ctx.grid();
  const auto& num = ctx.numerics();
  const int m = grid.m();
  const double h = grid.h();
  const auto& u = ctx.u0().line();
  PoleDivided out;
  out.at_nodes = pole_divided_transform(u, z, 0.0, h, m);
  auto neg = pole_divided_transform(u, z, -grid.xi_max(), h, m);
  out.at_negative.assign(neg.rbegin(), neg.rend());
  const auto gl = quad::gauss_legendre_unit(num.gauss_points);
  const int Q = num.gauss_points, nd = 2 * m - 2, dmin = -(m - 2);
  std::vector<cplx> B(std::size_t(nd) * Q);
  for (int q = 0; q < Q; ++q) {
    const auto col = pole_divided_transform(u, z, (double(dmin) - gl.nodes[q]) * h, h, nd);
    for (int d = 0; d < nd; ++d) B[std::size_t(d) * Q + q] = col[d];
  }
  out.toeplitz = toeplitz_matrix_from_samples(B, grid, num.order, Q);
  return out;
}

void check_contraction(double contraction) {
  if (!(contraction < 0.5)) {
    std::ostringstream os;
    os << "Neumann regime refused: 2|t| sup|u0(y)/(y-z)| = " << contraction
       << " is not below 1/2";
    throw RegimeRefusal(os.str());
  }
}

}  // namespace

double suggest_xi_max(const RealLineFunction& u0, double rel) {
  if (u0.is_zero()) return 40.0;
  const auto& f = u0.line();
  double peak = 0.0, last = 0.0;
  for (double xi = 0.0; xi <= 4000.0; xi += 0.25) peak = std::max(peak, std::abs(f.fourier(xi)));
  for (double xi = 0.0; xi <= 4000.0; xi += 0.25)
    if (std::abs(f.fourier(xi)) > rel * peak) last = xi;
  return std::max(40.0, std::ceil(1.25 * last));
}

void GeneratorSpec::validate() const {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("GeneratorSpec: eps must lie in [0, 1]");
  if (!std::isfinite(t)) throw ValidationError("GeneratorSpec: t must be finite");
}

FormulaContext::FormulaContext(RealLineFunction u0, FormulaNumerics num)
    : u0_(std::move(u0)), num_(num), grid_(num.xi_max, num.m) {
  if (num_.order < 1 || num_.order > 10) throw ValidationError("numerics: order must be in 1..10");
  if (num_.iplus_q < 0 || num_.iplus_q > 12) throw ValidationError("numerics: iplus_q in 0..12");
  if (num_.refinement_steps < 0) throw ValidationError("numerics: refinement_steps >= 0");
  const double bytes = 3.0 * 16.0 * double(num_.m) * double(num_.m);
  if (bytes > num_.memory_cap_bytes) {
    const int suggested = int(std::sqrt(num_.memory_cap_bytes / 48.0));
    std::ostringstream os;
    os << "numerics: m = " << num_.m << " needs about " << bytes / 1048576.0
       << " MiB of dense storage, above the cap; use m <= " << suggested;
    throw ValidationError(os.str());
  }
}

const HardyFunction& FormulaContext::pi_u0() const {
  std::call_once(pi_once_, [&] { pi_u0_ = project_szego(u0_, grid_, num_.window, num_.tol); });
  return *pi_u0_;
}

const Eigen::MatrixXcd& FormulaContext::toeplitz() const {
  std::call_once(toeplitz_once_, [&] {
    if (u0_.is_zero()) {
      toeplitz_ = Eigen::MatrixXcd::Zero(grid_.m(), grid_.m());
      return;
    }
    auto bhat = [&](double xi) { return u0_.line().fourier(xi); };
    const double tail = symbol_tail_ratio(bhat, grid_);
    if (tail > num_.tol.tail) {
      std::ostringstream os;
      os << "Toeplitz symbol not resolved: |u0^(xi_max)|/max|u0^| = " << tail
         << " exceeds " << num_.tol.tail << "; suggested xi_max >= " << suggest_xi_max(u0_);
      throw NumericalFailure(os.str());
    }
    toeplitz_ = toeplitz_matrix(bhat, grid_, num_.order, num_.gauss_points);
  });
  return toeplitz_;
}

double FormulaContext::growth_constant() const {
  std::call_once(growth_once_, [&] { growth_ = u0_.growth_constant(scan_window(u0_)); });
  return growth_;
}

void FormulaContext::check_growth_regime(double t) const {
  if (u0_.growth() != GrowthClass::Linear) return;
  const double C = growth_constant();
  if (2.0 * std::abs(t) * C >= 1.0) {
    std::ostringstream os;
    os << "regime refused: linear-growth data with |u0(x)| <= C<x>, C = " << C
       << ", needs |t| < 1/(2C) = " << 0.5 / C << " (short-time regime); got t = " << t;
    throw RegimeRefusal(os.str());
  }
}

void FormulaContext::check_phase(double t, double eps, const UpperHalfPoint& z) const {
  const double k0 = std::abs(z.real());
  const double k1 = std::abs(z.real() + 2.0 * eps * t * grid_.xi_max());
  // A feature of u0 centred at c puts e^{-i c xi} into every transform.
  double kc = 0.0;
  for (double c : u0_.line().hints().features) kc = std::max(kc, std::abs(c));
  const double k = std::max({k0, k1, kc});
  const double phase = grid_.h() * k;
  if (phase > num_.phase_limit) {
    const int suggested = int(std::ceil(k * grid_.xi_max() / num_.phase_limit)) + 2;
    std::ostringstream os;
    os << "grid too coarse for z = " << z.real() << (z.imag() >= 0 ? "+" : "") << z.imag()
       << "i at t = " << t << ": h*max(|Re z + 2 eps t xi|, |feature centre|) reaches " << phase
       << " (limit " << num_.phase_limit << "); use m >= " << suggested;
    throw ValidationError(os.str());
  }
}

Eigen::MatrixXcd FormulaContext::assemble(double t, double eps) const {
  GeneratorSpec{u0_, t, eps, grid_}.validate();
  const int m = grid_.m();
  Eigen::MatrixXcd A;
  if (t != 0.0 && !u0_.is_zero()) A = (2.0 * t) * toeplitz();
  else A = Eigen::MatrixXcd::Zero(m, m);
  const auto c = forward_difference_weights(num_.order);
  const double h = grid_.h();
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k <= num_.order && j + k < m; ++k) A(j, j + k) += kI * (c[k] / h);
    A(j, j) -= 2.0 * eps * t * grid_.node(j);
  }
  return A;
}

ResolventSolve FormulaContext::resolve(double t, double eps, const UpperHalfPoint& z,
                                       const HardyFunction& rhs) const {
  if (!(rhs.grid() == grid_)) throw ValidationError("resolve: rhs lives on a different grid");
  check_phase(t, eps, z);
  ResolventSolve out{t, eps, z.value(), HardyFunction(grid_), 0.0, 1.0};
  Eigen::MatrixXcd A = assemble(t, eps);
  A.diagonal().array() -= z.value();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  out.rcond = lu.rcond();
  if (rhs.is_zero()) return out;
  const Eigen::VectorXcd& b = rhs.values();
  Eigen::VectorXcd w = lu.solve(b);
  for (int it = 0; it < num_.refinement_steps; ++it) {
    const Eigen::VectorXcd r = b - A * w;
    w += lu.solve(r);
  }
  out.residual = (A * w - b).norm() / b.norm();
  if (!w.allFinite() || !(out.residual <= num_.tol.solve)) {
    std::ostringstream os;
    os << "resolve: residual " << out.residual << " above solve_tol " << num_.tol.solve
       << " (rcond estimate " << out.rcond << ")";
    if (u0_.growth() == GrowthClass::Linear)
      os << "; linear-growth data may be outside the regime |t| < 1/(2C)";
    throw NumericalFailure(os.str());
  }
  out.w = HardyFunction(grid_, std::move(w));
  return out;
}

FormulaValue FormulaContext::formula(double t, double eps, const UpperHalfPoint& z) const {
  FormulaValue v;
  v.z = z.value();
  if (u0_.is_zero()) return v;
  const auto solve = resolve(t, eps, z, pi_u0());
  const cplx ip = num_.iplus_q == 0 ? solve.w[0] : i_plus(solve.w, num_.iplus_q);
  v.value = ip / (2.0 * kI * kPi);
  v.residual = solve.residual;
  v.rcond = solve.rcond;
  return v;
}

Eigen::MatrixXcd assemble_generator(const GeneratorSpec& spec, const FormulaNumerics& num) {
  spec.validate();
  FormulaNumerics n = num;
  n.xi_max = spec.grid.xi_max();
  n.m = spec.grid.m();
  return FormulaContext(spec.u0, n).assemble(spec.t, spec.eps);
}

ResolventSolve resolve(const GeneratorSpec& spec, const UpperHalfPoint& z, const HardyFunction& rhs,
                       const FormulaNumerics& num) {
  spec.validate();
  FormulaNumerics n = num;
  n.xi_max = spec.grid.xi_max();
  n.m = spec.grid.m();
  return FormulaContext(spec.u0, n).resolve(spec.t, spec.eps, z, rhs);
}

FormulaValue pi_u_explicit(const FormulaContext& ctx, double t, const UpperHalfPoint& z) {
  auto v = ctx.formula(t, 1.0, z);
  v.method = "explicit";
  return v;
}

FormulaValue pi_u_explicit(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                           const FormulaNumerics& num) {
  return pi_u_explicit(FormulaContext(u0, num), t, z);
}

FormulaValue zd_operator(const FormulaContext& ctx, double t, const UpperHalfPoint& z) {
  ctx.check_growth_regime(t);
  auto v = ctx.formula(t, 0.0, z);
  v.method = "zd-operator";
  return v;
}

FormulaValue zd_operator(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                         const FormulaNumerics& num) {
  return zd_operator(FormulaContext(u0, num), t, z);
}

std::vector<cplx> pole_divided_transform(const LineFunction& u, cplx z, double start, double h,
                                         int count) {
  if (!(z.imag() > 0.0)) throw ValidationError("pole_divided_transform: Im z must be > 0");
  std::vector<cplx> out(static_cast<std::size_t>(std::max(count, 0)));
  if (count <= 0 || u.is_zero()) return out;
  static const auto gl = quad::gauss_legendre_unit(16);
  auto uhat = [&](double xi) { return u.fourier(xi); };
  // i int_a^b e^{iz(eta - a)} u^(eta) d eta by Gauss-Legendre
  auto cell = [&](double a, double b) {
    cplx acc{};
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double s = gl.nodes[q] * (b - a);
      acc += gl.weights[q] * std::exp(kI * z * s) * uhat(a + s);
    }
    return kI * acc * (b - a);
  };
  const double top = start + h * (count - 1);
  {
    const double ref = std::max(std::abs(uhat(top)), 1e-300);
    auto g = [&](double s) { return uhat(top + s) * std::exp(kI * z * s); };
    quad::Options opt;
    opt.abs_tol = 1e-17 * std::max(ref, std::abs(uhat(0.0)));
    opt.rel_tol = 1e-13;
    const double kink = std::max(0.0, -top);
    const double split = kink + 1.0;
    const double brk[] = {kink};
    const auto head = quad::integrate(g, 0.0, split, brk, opt);
    const auto tail = quad::integrate_right_tail(g, split, 1.0 / std::min(z.imag(), 1.0), opt);
    out[count - 1] = kI * (head.value + tail.value);
  }
  const cplx decay = std::exp(kI * z * h);
  for (int k = count - 2; k >= 0; --k) {
    const double a = start + h * k, b = a + h;
    cplx c;
    if (a < 0.0 && b > 0.0) c = cell(a, 0.0) + std::exp(kI * z * (-a)) * cell(0.0, b);
    else c = cell(a, b);
    out[k] = decay * out[k + 1] + c;
  }
  return out;
}

double sup_fz(const RealLineFunction& u0, const UpperHalfPoint& z) {
  if (u0.is_zero()) return 0.0;
  const double extra[] = {z.real()};
  const cplx zz = z.value();
  return u0.sup_weighted(scan_window(u0, 2.0 * std::abs(z.real()) + 20.0),
                         [zz](double y) { return 1.0 / std::abs(y - zz); }, extra);
}

NeumannResult neumann_zd(const FormulaContext& ctx, double t, const UpperHalfPoint& z, int n_max) {
  if (n_max < 1) throw ValidationError("neumann_zd: n_max must be >= 1");
  NeumannResult res;
  res.term_magnitudes.assign(std::size_t(n_max), 0.0);
  if (ctx.u0().is_zero()) return res;
  res.contraction = 2.0 * std::abs(t) * sup_fz(ctx.u0(), z);
  check_contraction(res.contraction);
  const cplx term1 = eval_upper_half(ctx.pi_u0(), z);
  res.value = term1;
  res.term_magnitudes[0] = std::abs(term1);
  if (n_max >= 2 && t != 0.0) {
    const auto pd = pole_divided(ctx, z);
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(pd.at_nodes.data(), ctx.grid().m());
    cplx coef = -2.0 * t;
    for (int n = 2; n <= n_max; ++n) {
      const cplx term = pair(ctx.grid(), pd.at_negative, v) / (2.0 * kI * kPi);
      res.value += coef * term;
      res.term_magnitudes[n - 1] = std::abs(coef * term);
      coef *= -2.0 * t;
      if (n < n_max) v = pd.toeplitz * v;
    }
  }
  const auto& mag = res.term_magnitudes;
  const double floor = 1e-15 * std::max(std::abs(res.value), 1e-300);
  if (n_max >= 3 && mag[1] > floor) {
    for (int n = 3; n <= n_max; ++n) {
      if (mag[n - 1] <= floor) break;
      res.observed_ratio =
          std::max(res.observed_ratio, std::pow(mag[n - 1] / mag[1], 1.0 / double(n - 2)));
    }
    if (mag[n_max - 1] > floor && mag[n_max - 1] >= mag[1]) {
      std::ostringstream os;
      os << "neumann_zd: terms are not decaying (|term_" << n_max << "| = " << mag[n_max - 1]
         << ", |term_2| = " << mag[1] << ")";
      throw NumericalFailure(os.str());
    }
  }
  return res;
}

NeumannResult neumann_zd(const RealLineFunction& u0, double t, const UpperHalfPoint& z, int n_max,
                         const FormulaNumerics& num) {
  return neumann_zd(FormulaContext(u0, num), t, z, n_max);
}

TermReduction term_reduction_check(const FormulaContext& ctx, double t, const UpperHalfPoint& z,
                                   int n) {
  if (n < 2) throw ValidationError("term_reduction_check: n must be >= 2");
  TermReduction r;
  const auto& u0 = ctx.u0();
  if (u0.is_zero()) return r;
  check_contraction(2.0 * std::abs(t) * sup_fz(u0, z));
  const auto pd = pole_divided(ctx, z);
  Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(pd.at_nodes.data(), ctx.grid().m());
  for (int k = 0; k < n - 2; ++k) v = pd.toeplitz * v;
  r.lhs = pair(ctx.grid(), pd.at_negative, v);

  const cplx zz = z.value();
  auto fn = [&](double y) { return std::pow(u0(y) / (y - zz), n); };
  auto pts = u0.line().breakpoints();
  pts.push_back(z.real());
  quad::Options opt;
  opt.abs_tol = 1e-15;
  opt.rel_tol = 1e-13;
  const auto q = quad::integrate_line(fn, pts, std::max(1.0, u0.line().hints().scale), opt);
  r.rhs = q.value / double(n);
  const double den = std::abs(r.rhs);
  r.rel_err = den > 0.0 ? std::abs(r.lhs - r.rhs) / den : std::abs(r.lhs);
  return r;
}

TermReduction term_reduction_check(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                                   int n, const FormulaNumerics& num) {
  return term_reduction_check(FormulaContext(u0, num), t, z, n);
}

BoundaryTrace boundary_trace(const FormulaContext& ctx, double t, double eps, double delta,
                             const std::vector<double>& x) {
  if (!(delta > 0.0)) throw ValidationError("boundary_trace: delta must be > 0");
  if (x.size() < 2) throw ValidationError("boundary_trace: need at least two x samples");
  BoundaryTrace bt;
  bt.x = x;
  bt.values.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto v = ctx.formula(t, eps, UpperHalfPoint(x[k], delta));
    bt.values[k] = v.value;
    bt.max_residual = std::max(bt.max_residual, v.residual);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k)
    acc += 0.5 * (x[k + 1] - x[k]) * (std::norm(bt.values[k]) + std::norm(bt.values[k + 1]));
  bt.trace_norm = std::sqrt(acc);
  bt.reference_norm = ctx.pi_u0().norm();
  return bt;
}

CauchyReport cauchy_check(const std::function<cplx(cplx)>& f, cplx center, double radius, int n) {
  if (!(radius > 0.0) || n < 4) throw ValidationError("cauchy_check: bad circle");
  CauchyReport r;
  cplx mean{}, contour{};
  for (int k = 0; k < n; ++k) {
    const cplx e = std::exp(kI * (2.0 * kPi * k / n));
    const cplx v = f(center + radius * e);
    mean += v;
    contour += v * kI * e;
    r.scale = std::max(r.scale, std::abs(v));
  }
  mean /= double(n);
  contour /= double(n);
  r.mean_value_residual = std::abs(f(center) - mean);
  r.contour_residual = std::abs(contour);
  return r;
}

void write_formula_csv(std::ostream& os, const std::vector<FormulaValue>& rows) {
  os << "re_z,im_z,re_val,im_val,residual,method\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << r.z.real() << ',' << r.z.imag() << ',' << r.value.real() << ',' << r.value.imag() << ','
       << r.residual << ',' << r.method << '\n';
}

}  // namespace bozd
