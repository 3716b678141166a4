#include "bozd/hardy.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "bozd/quadrature.hpp"

namespace bozd {

namespace {

constexpr int kGregory = 7;

std::vector<double> gregory_corrections() {
  // sum_j d_j j^k = B_{k+1}/(k+1) for odd k, 0 for even k.
  const double rhs[kGregory] = {0.0, 1.0 / 12.0, 0.0, -1.0 / 120.0, 0.0, 1.0 / 252.0, 0.0};
  Eigen::MatrixXd V(kGregory, kGregory);
  Eigen::VectorXd b(kGregory);
  for (int k = 0; k < kGregory; ++k) {
    for (int j = 0; j < kGregory; ++j) V(k, j) = std::pow(double(j), k);
    b[k] = rhs[k];
  }
  Eigen::VectorXd d = V.fullPivLu().solve(b);
  return {d.data(), d.data() + kGregory};
}

/// Lagrange basis on integer nodes o..o+p evaluated at s.
std::vector<double> lagrange_basis(int o, int p, double s) {
  std::vector<double> L(p + 1, 1.0);
  for (int r = 0; r <= p; ++r)
    for (int q = 0; q <= p; ++q)
      if (q != r) L[r] *= (s - double(o + q)) / double(r - q);
  return L;
}

int stencil_start(int k, int m, int p) {
  return std::min(std::max(k - (p - 1) / 2, 0), m - 1 - p);
}

void require_same_grid(const HardyFunction& a, const HardyFunction& b) {
  if (!(a.grid() == b.grid())) throw ValidationError("HardyFunction: grids differ");
}

}  // namespace

FrequencyGrid::FrequencyGrid(double xi_max, int m) : xi_max_(xi_max), m_(m) {
  if (!(xi_max > 0.0) || !std::isfinite(xi_max))
    throw ValidationError("FrequencyGrid: xi_max must be positive and finite");
  if (m < kMinNodes) throw ValidationError("FrequencyGrid: m must be >= 64");
  h_ = xi_max / double(m - 1);
  auto w = std::make_shared<std::vector<double>>(std::size_t(m), h_);
  (*w)[0] = (*w)[m - 1] = 0.5 * h_;
  static const std::vector<double> d = gregory_corrections();
  for (int j = 0; j < kGregory; ++j) {
    (*w)[j] += h_ * d[j];
    (*w)[m - 1 - j] += h_ * d[j];
  }
  weights_ = std::move(w);
}

std::vector<double> FrequencyGrid::nodes() const {
  std::vector<double> v(static_cast<std::size_t>(m_));
  for (int j = 0; j < m_; ++j) v[j] = node(j);
  return v;
}

HardyFunction::HardyFunction(const FrequencyGrid& grid)
    : grid_(grid), values_(Eigen::VectorXcd::Zero(grid.m())) {}

HardyFunction::HardyFunction(const FrequencyGrid& grid, Eigen::VectorXcd values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid.m()) throw ValidationError("HardyFunction: size does not match grid");
}

HardyFunction HardyFunction::from_fourier(const FrequencyGrid& grid,
                                          const std::function<cplx(double)>& fhat) {
  HardyFunction f(grid);
  for (int j = 0; j < grid.m(); ++j) f.values_[j] = fhat(grid.node(j));
  return f;
}

double HardyFunction::norm_sq() const {
  const auto& w = grid_.weights();
  double acc = 0.0;
  for (int j = 0; j < grid_.m(); ++j) acc += w[j] * std::norm(values_[j]);
  return acc / (2.0 * kPi);
}

double HardyFunction::tail_ratio() const {
  const double mx = values_.cwiseAbs().maxCoeff();
  if (mx == 0.0) return 0.0;
  return std::abs(values_[grid_.m() - 1]) / mx;
}

cplx HardyFunction::boundary_value(double x) const {
  const auto& w = grid_.weights();
  const cplx step = std::exp(cplx(0.0, x * grid_.h()));
  cplx phase = 1.0, acc{};
  for (int j = 0; j < grid_.m(); ++j) {
    if ((j & 63) == 0) phase = std::exp(cplx(0.0, x * grid_.node(j)));
    acc += w[j] * values_[j] * phase;
    phase *= step;
  }
  return acc / (2.0 * kPi);
}

HardyFunction HardyFunction::operator+(const HardyFunction& o) const {
  require_same_grid(*this, o);
  return HardyFunction(grid_, values_ + o.values_);
}

HardyFunction HardyFunction::operator-(const HardyFunction& o) const {
  require_same_grid(*this, o);
  return HardyFunction(grid_, values_ - o.values_);
}

HardyFunction HardyFunction::operator*(cplx s) const { return HardyFunction(grid_, values_ * s); }

void HardyFunction::write_csv(std::ostream& os) const {
  os << "# xi_max=" << std::setprecision(17) << grid_.xi_max() << " m=" << grid_.m() << '\n';
  os << "xi,re,im\n";
  for (int j = 0; j < grid_.m(); ++j)
    os << grid_.node(j) << ',' << values_[j].real() << ',' << values_[j].imag() << '\n';
}

HardyFunction HardyFunction::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# xi_max=", 0) != 0)
    throw ValidationError("HardyFunction csv: missing '# xi_max=<X> m=<m>' header");
  double xi_max = 0.0;
  int m = 0;
  if (std::sscanf(line.c_str(), "# xi_max=%lf m=%d", &xi_max, &m) != 2)
    throw ValidationError("HardyFunction csv: malformed header '" + line + "'");
  FrequencyGrid grid(xi_max, m);
  HardyFunction f(grid);
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    double xi, re, im;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &xi, &re, &im) != 3)
      throw ValidationError("HardyFunction csv: malformed row '" + line + "'");
    if (row >= m) throw ValidationError("HardyFunction csv: more rows than m");
    if (std::abs(xi - grid.node(row)) > 1e-9 * (1.0 + xi_max))
      throw ValidationError("HardyFunction csv: xi column does not match the grid");
    f.values_[row++] = cplx(re, im);
  }
  if (row != m) throw ValidationError("HardyFunction csv: expected m rows");
  return f;
}

cplx inner(const HardyFunction& f, const HardyFunction& g) {
  require_same_grid(f, g);
  const auto& w = f.grid().weights();
  cplx acc{};
  for (int j = 0; j < f.grid().m(); ++j) acc += w[j] * f[j] * std::conj(g[j]);
  return acc / (2.0 * kPi);
}

UpperHalfPoint::UpperHalfPoint(cplx z) : z_(z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw ValidationError("UpperHalfPoint: z must be finite");
  if (!(z.imag() > 0.0)) throw ValidationError("UpperHalfPoint: Im z must be > 0");
}

std::vector<double> forward_difference_weights(int order) {
  if (order < 1 || order > 10) throw ValidationError("forward_difference_weights: order in 1..10");
  const int n = order + 1;
  Eigen::MatrixXd V(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) V(k, j) = std::pow(double(j), k);
  b[1] = 1.0;
  Eigen::VectorXd c = V.fullPivLu().solve(b);
  return {c.data(), c.data() + n};
}

double window_tail_fraction(const RealLineFunction& u, double window) {
  if (u.is_zero()) return 0.0;
  if (!(window > 0.0)) throw ValidationError("window must be > 0");
  auto sq = [&](double x) {
    const double v = u(x);
    return cplx(v * v, 0.0);
  };
  quad::Options opt;
  opt.abs_tol = 1e-16;
  opt.rel_tol = 1e-10;
  const double scale = std::max(1.0, window);
  const double right = quad::integrate_right_tail(sq, window, scale, opt).value.real();
  auto sq_left = [&](double x) { return sq(-x); };
  const double left = quad::integrate_right_tail(sq_left, window, scale, opt).value.real();
  const double inside = u.l2_norm_sq(window);
  const double total = inside + left + right;
  if (!(total > 0.0)) return 0.0;
  return (left + right) / total;
}

HardyFunction project_szego(const RealLineFunction& u, const FrequencyGrid& grid, double window,
                            const Tolerances& tol) {
  if (u.is_zero()) return HardyFunction(grid);
  const double frac = window_tail_fraction(u, window);
  if (!std::isfinite(frac))
    throw ValidationError("project_szego: u0^2 is not integrable over the window");
  if (frac >= tol.window * tol.window) {
    std::ostringstream os;
    os << "project_szego: window " << window << " misses a fraction " << frac
       << " of the L2 mass (limit " << tol.window * tol.window << "); enlarge the window";
    throw ValidationError(os.str());
  }
  return project_szego(u.line(), grid, tol);
}

HardyFunction project_szego(const LineFunction& u, const FrequencyGrid& grid,
                            const Tolerances& tol) {
  if (u.is_zero()) return HardyFunction(grid);
  HardyFunction f = HardyFunction::from_fourier(grid, [&](double xi) { return u.fourier(xi); });
  for (int j = 0; j < grid.m(); ++j)
    if (!std::isfinite(f[j].real()) || !std::isfinite(f[j].imag()))
      throw NumericalFailure("project_szego: non-finite transform sample");
  const double tail = f.tail_ratio();
  if (tail > tol.tail) {
    std::ostringstream os;
    os << "project_szego: resolution inadequate, |f^(xi_max)|/max|f^| = " << tail
       << " exceeds tail_tol " << tol.tail << "; increase xi_max";
    throw NumericalFailure(os.str());
  }
  return f;
}

cplx i_plus(const HardyFunction& f, int q) {
  const int m = f.grid().m();
  if (q < 1 || q + 1 > m) throw ValidationError("i_plus: q out of range");
  double scale = 0.0;
  for (int k = 1; k <= q; ++k) scale = std::max(scale, std::abs(f[k]));
  if (scale == 0.0) return {};
  if (!std::isfinite(scale)) throw NumericalFailure("i_plus: non-finite samples near 0");
  // Oscillation check on the stencil: second differences comparable to the
  // values themselves mean the samples are not a discretized Dom(G) element.
  double osc = 0.0;
  for (int k = 1; k + 2 <= std::max(q, 3) && k + 2 < m; ++k)
    osc = std::max(osc, std::abs(f[k] - 2.0 * f[k + 1] + f[k + 2]));
  if (osc > 0.5 * scale)
    throw NumericalFailure("i_plus: oscillatory samples near xi = 0, not in Dom(G) numerically");
  cplx acc{};
  for (int k = 1; k <= q; ++k) {
    double w = 1.0;
    for (int l = 1; l <= q; ++l)
      if (l != k) w *= double(-l) / double(k - l);
    acc += w * f[k];
  }
  return acc;
}

HardyFunction apply_G(const HardyFunction& f, int order) {
  const auto c = forward_difference_weights(order);
  const int m = f.grid().m();
  const double h = f.grid().h();
  Eigen::VectorXcd out(m);
  for (int j = 0; j < m; ++j) {
    cplx acc{};
    for (int k = 0; k <= order && j + k < m; ++k) acc += c[k] * f[j + k];
    out[j] = kI * acc / h;
  }
  return HardyFunction(f.grid(), std::move(out));
}

HardyFunction apply_D(const HardyFunction& f) {
  Eigen::VectorXcd out = f.values();
  for (int j = 0; j < f.grid().m(); ++j) out[j] *= f.grid().node(j);
  return HardyFunction(f.grid(), std::move(out));
}

Eigen::MatrixXcd toeplitz_matrix(const std::function<cplx(double)>& bhat, const FrequencyGrid& grid,
                                 int p, int gauss_points) {
  const int m = grid.m();
  const double h = grid.h();
  const auto gl = quad::gauss_legendre_unit(gauss_points);
  const int Q = gauss_points;
  const int dmin = -(m - 2), nd = 2 * m - 2;
  std::vector<cplx> B(std::size_t(nd) * Q);
  for (int d = 0; d < nd; ++d)
    for (int q = 0; q < Q; ++q) B[std::size_t(d) * Q + q] = bhat((double(d + dmin) - gl.nodes[q]) * h);
  return toeplitz_matrix_from_samples(B, grid, p, gauss_points);
}

Eigen::MatrixXcd toeplitz_matrix_from_samples(const std::vector<cplx>& B, const FrequencyGrid& grid,
                                              int p, int gauss_points) {
  const int m = grid.m();
  if (p < 1 || p >= m) throw ValidationError("toeplitz_matrix: bad interpolation order");
  const double h = grid.h();
  const auto gl = quad::gauss_legendre_unit(gauss_points);
  const int Q = gauss_points;
  const int dmin = -(m - 2), nd = 2 * m - 2;
  if (B.size() != std::size_t(nd) * Q) throw ValidationError("toeplitz_matrix: sample count mismatch");
  // Per stencil offset o = st - k in [1-p, 0]: P_o[d][r] = sum_q B[d][q] W_o[r][q].
  std::vector<std::vector<cplx>> P(static_cast<std::size_t>(p));
  for (int oi = 0; oi < p; ++oi) {
    const int o = -oi;
    std::vector<double> W(std::size_t(p + 1) * Q);
    for (int q = 0; q < Q; ++q) {
      const auto L = lagrange_basis(o, p, gl.nodes[q]);
      for (int r = 0; r <= p; ++r) W[std::size_t(r) * Q + q] = gl.weights[q] * h * L[r];
    }
    auto& Po = P[oi];
    Po.assign(std::size_t(nd) * (p + 1), cplx{});
    for (int d = 0; d < nd; ++d)
      for (int r = 0; r <= p; ++r) {
        cplx acc{};
        for (int q = 0; q < Q; ++q) acc += B[std::size_t(d) * Q + q] * W[std::size_t(r) * Q + q];
        Po[std::size_t(d) * (p + 1) + r] = acc / (2.0 * kPi);
      }
  }
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(m, m);
  for (int k = 0; k + 1 < m; ++k) {
    const int st = stencil_start(k, m, p);
    const auto& Po = P[std::size_t(k - st)];
    for (int r = 0; r <= p; ++r) {
      cplx* col = M.col(st + r).data();
      for (int j = 0; j < m; ++j) col[j] += Po[std::size_t(j - k - dmin) * (p + 1) + r];
    }
  }
  return M;
}

double symbol_tail_ratio(const std::function<cplx(double)>& bhat, const FrequencyGrid& grid) {
  double mx = 0.0;
  for (int j = 0; j < grid.m(); ++j)
    mx = std::max({mx, std::abs(bhat(grid.node(j))), std::abs(bhat(-grid.node(j)))});
  if (mx == 0.0) return 0.0;
  return std::max(std::abs(bhat(grid.xi_max())), std::abs(bhat(-grid.xi_max()))) / mx;
}

HardyFunction toeplitz_apply(const RealLineFunction& b, const HardyFunction& f,
                             const Tolerances& tol, int order, ToeplitzDiagnostics* diag) {
  return toeplitz_apply(b.line(), f, tol, order, diag);
}

HardyFunction toeplitz_apply(const LineFunction& b, const HardyFunction& f, const Tolerances& tol,
                             int order, ToeplitzDiagnostics* diag) {
  if (b.is_zero() || f.is_zero()) {
    if (diag) *diag = {};
    return HardyFunction(f.grid());
  }
  auto bhat = [&](double xi) { return b.fourier(xi); };
  ToeplitzDiagnostics d;
  d.symbol_tail = symbol_tail_ratio(bhat, f.grid());
  const auto M = toeplitz_matrix(bhat, f.grid(), order);
  HardyFunction out(f.grid(), M * f.values());
  d.product_tail = out.tail_ratio();
  if (diag) *diag = d;
  if (d.symbol_tail > tol.tail || d.product_tail > tol.tail) {
    std::ostringstream os;
    os << "toeplitz_apply: aliasing/truncation detected (symbol tail " << d.symbol_tail
       << ", product tail " << d.product_tail << ", limit " << tol.tail << "); increase xi_max";
    throw NumericalFailure(os.str());
  }
  return out;
}

HardyFunction resolvent_G(const UpperHalfPoint& zp, const HardyFunction& f,
                          const ResolventOptions& opt) {
  const auto& grid = f.grid();
  if (f.is_zero()) return HardyFunction(grid);
  const cplx z = zp.value();
  const int m = grid.m(), p = opt.order;
  if (p < 1 || p >= m) throw ValidationError("resolvent_G: bad order");
  const double h = grid.h();
  const auto gl = quad::gauss_legendre_unit(opt.gauss_points);
  // Cell weights: i int_0^h e^{iz s} L_r(s/h) ds for each stencil offset.
  std::vector<std::vector<cplx>> W(static_cast<std::size_t>(p));
  for (int oi = 0; oi < p; ++oi) {
    W[oi].assign(std::size_t(p + 1), cplx{});
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const auto L = lagrange_basis(-oi, p, gl.nodes[q]);
      const cplx e = std::exp(kI * z * (gl.nodes[q] * h)) * (gl.weights[q] * h);
      for (int r = 0; r <= p; ++r) W[oi][r] += kI * e * L[r];
    }
  }
  const cplx decay = std::exp(kI * z * h);
  Eigen::VectorXcd w(m);
  w[m - 1] = -f[m - 1] / z;
  for (int k = m - 2; k >= 0; --k) {
    const int st = stencil_start(k, m, p);
    const auto& Wk = W[std::size_t(k - st)];
    cplx cell{};
    for (int r = 0; r <= p; ++r) cell += Wk[r] * f[st + r];
    w[k] = decay * w[k + 1] + cell;
  }
  HardyFunction out(grid, std::move(w));
  if (opt.validate) {
    const cplx fz = eval_upper_half(f, zp);
    double scale = 0.0;
    const auto& wq = grid.weights();
    for (int j = 0; j < m; ++j) scale += std::abs(wq[j] * f[j]);
    scale /= 2.0 * kPi;
    const double limit = opt.tol.consistency * scale / std::min(1.0, zp.imag());
    for (double x : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
      const cplx phys = (f.boundary_value(x) - fz) / (x - z);
      const cplx freq = out.boundary_value(x);
      if (std::abs(phys - freq) > limit) {
        std::ostringstream os;
        os << "resolvent_G: frequency and physical computations disagree at x = " << x << " by "
           << std::abs(phys - freq) << " (limit " << limit << ")";
        throw NumericalFailure(os.str());
      }
    }
  }
  return out;
}

cplx eval_upper_half(const HardyFunction& f, const UpperHalfPoint& zp, EvalRoute route, int q) {
  if (f.is_zero()) return {};
  if (route == EvalRoute::Resolvent) {
    ResolventOptions opt;
    opt.validate = false;
    return i_plus(resolvent_G(zp, f, opt), q) / (2.0 * kI * kPi);
  }
  const auto& grid = f.grid();
  const auto& w = grid.weights();
  const cplx z = zp.value();
  cplx acc{};
  for (int j = 0; j < grid.m(); ++j) acc += w[j] * std::exp(kI * z * grid.node(j)) * f[j];
  return acc / (2.0 * kPi);
}

}  // namespace bozd
