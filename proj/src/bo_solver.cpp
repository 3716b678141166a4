#include "bozd/bo_solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bozd/quadrature.hpp"
#include "bozd/zd_limit.hpp"

namespace bozd {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

using CVec = std::vector<cplx>;

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

/// Owns an r2c/c2r plan pair for one length.
struct Plans {
  int n = 0;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  explicit Plans(int n_) : n(n_) {
    std::vector<double> r(std::size_t(n), 0.0);
    CVec c(std::size_t(n / 2 + 1));
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(n, r.data(), as_fftw(c.data()), FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd = fftw_plan_dft_c2r_1d(n, as_fftw(c.data()), r.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  }
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;

  void forward(const std::vector<double>& in, CVec& out) const {
    out.resize(std::size_t(n / 2 + 1));
    fftw_execute_dft_r2c(fwd, const_cast<double*>(in.data()), as_fftw(out.data()));
  }
  /// Overwrites `in`; result is unnormalized.
  void backward(CVec& in, std::vector<double>& out) const {
    out.resize(std::size_t(n));
    fftw_execute_dft_c2r(bwd, as_fftw(in.data()), out.data());
  }
};

double max_abs(const std::vector<double>& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

RealLineFunction make_test_function(std::function<double(double)> f,
                                    std::function<double(double)> df, double center, double width,
                                    std::string description) {
  ShapeHints h{{center}, width, std::abs(center) + 8.0 * width, width};
  LineFunction line([f](double x) { return cplx(f(x), 0.0); }, nullptr, h, true);
  return RealLineFunction(line, std::move(df),
                          {FamilyTag::CustomSampled, GrowthClass::Bounded, true, std::move(description)});
}

}  // namespace

void Box::validate() const {
  if (!(half_width > 0.0) || !std::isfinite(half_width))
    throw ValidationError("box: half width L must be positive");
  if (n_modes < 16 || (n_modes & (n_modes - 1)) != 0)
    throw ValidationError("box: n_modes must be a power of two >= 16");
}

SolverState initial_state(const RealLineFunction& u0, double eps, const Box& box, double box_tol) {
  box.validate();
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("solver: eps must be > 0");
  SolverState s;
  s.box = box;
  s.eps = eps;
  s.u.resize(std::size_t(box.n_modes));
  for (int j = 0; j < box.n_modes; ++j) {
    s.u[j] = u0(box.x(j));
    if (!std::isfinite(s.u[j])) throw ValidationError("solver: u0 is not finite on the grid");
  }
  const double peak = max_abs(s.u);
  const double edge = std::max(std::abs(u0(-box.half_width)), std::abs(u0(box.half_width)));
  if (peak > 0.0 && edge > box_tol * peak) {
    std::ostringstream os;
    os << "solver: |u0| at the box edge is " << edge / peak
       << " of its maximum (box_tol " << box_tol << "); enlarge L";
    throw ValidationError(os.str());
  }
  return s;
}

struct BoStepper::Impl {
  Box box;
  double eps;
  StepperConfig cfg;
  int n, nh;
  Plans plans;
  std::vector<double> k;
  std::vector<char> keep;
  double k_cut = 0.0;
  // ETDRK4 coefficients
  CVec E, E2, Q, f1, f2, f3;

  Impl(const Box& b, double e, const StepperConfig& c)
      : box(b), eps(e), cfg(c), n(b.n_modes), nh(b.n_modes / 2 + 1), plans(b.n_modes) {
    k.resize(std::size_t(nh));
    keep.resize(std::size_t(nh));
    const double dk = kPi / box.half_width;
    for (int j = 0; j < nh; ++j) {
      k[j] = dk * j;
      keep[j] = (j < cfg.dealias * 0.5 * n && j != n / 2) ? 1 : 0;
      if (keep[j]) k_cut = k[j];
    }
    E.resize(std::size_t(nh));
    E2.resize(std::size_t(nh));
    Q.resize(std::size_t(nh));
    f1.resize(std::size_t(nh));
    f2.resize(std::size_t(nh));
    f3.resize(std::size_t(nh));
    const double h = cfg.dt;
    const int M = 64;
    for (int j = 0; j < nh; ++j) {
      const cplx L = kI * (eps * k[j] * k[j]);
      E[j] = std::exp(L * h);
      E2[j] = std::exp(L * h * 0.5);
      cplx q{}, a{}, b{}, cc{};
      for (int r = 0; r < M; ++r) {
        const cplx z = L * h + std::exp(kI * (2.0 * kPi * (r + 0.5) / M));
        const cplx ez = std::exp(z), z3 = z * z * z;
        q += (std::exp(z * 0.5) - 1.0) / z;
        a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
        b += (2.0 + z + ez * (-2.0 + z)) / z3;
        cc += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
      }
      Q[j] = h * q / double(M);
      f1[j] = h * a / double(M);
      f2[j] = h * b / double(M);
      f3[j] = h * cc / double(M);
    }
  }

  /// -ik (u^2)^ on the kept modes.
  void nonlin(const CVec& v, CVec& out, CVec& work, std::vector<double>& u) const {
    out.assign(std::size_t(nh), cplx{});
    if (!cfg.nonlinear) return;
    work = v;
    plans.backward(work, u);
    const double inv = 1.0 / n;
    for (double& x : u) {
      x *= inv;
      x *= x;
    }
    plans.forward(u, work);
    for (int j = 0; j < nh; ++j)
      if (keep[j]) out[j] = -kI * k[j] * work[j];
  }

  void step_etdrk4(CVec& v) const {
    CVec Nv, Na, Nb, Nc, a(nh), b(nh), c(nh), work;
    std::vector<double> u;
    nonlin(v, Nv, work, u);
    for (int j = 0; j < nh; ++j) a[j] = E2[j] * v[j] + Q[j] * Nv[j];
    nonlin(a, Na, work, u);
    for (int j = 0; j < nh; ++j) b[j] = E2[j] * v[j] + Q[j] * Na[j];
    nonlin(b, Nb, work, u);
    for (int j = 0; j < nh; ++j) c[j] = E2[j] * a[j] + Q[j] * (2.0 * Nb[j] - Nv[j]);
    nonlin(c, Nc, work, u);
    for (int j = 0; j < nh; ++j)
      v[j] = E[j] * v[j] + Nv[j] * f1[j] + 2.0 * (Na[j] + Nb[j]) * f2[j] + Nc[j] * f3[j];
  }

  void step_strang(CVec& v) const {
    for (int j = 0; j < nh; ++j) v[j] *= E2[j];
    CVec k1, k2, k3, k4, tmp(nh), work;
    std::vector<double> u;
    const double h = cfg.dt;
    nonlin(v, k1, work, u);
    for (int j = 0; j < nh; ++j) tmp[j] = v[j] + 0.5 * h * k1[j];
    nonlin(tmp, k2, work, u);
    for (int j = 0; j < nh; ++j) tmp[j] = v[j] + 0.5 * h * k2[j];
    nonlin(tmp, k3, work, u);
    for (int j = 0; j < nh; ++j) tmp[j] = v[j] + h * k3[j];
    nonlin(tmp, k4, work, u);
    for (int j = 0; j < nh; ++j) v[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    for (int j = 0; j < nh; ++j) v[j] *= E2[j];
  }
};

BoStepper::BoStepper(const Box& box, double eps, const StepperConfig& config) {
  box.validate();
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("solver: eps must be > 0");
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) throw ValidationError("solver: dt must be > 0");
  if (!(config.dealias > 0.0 && config.dealias <= 1.0))
    throw ValidationError("solver: dealias fraction must lie in (0, 1]");
  impl_ = std::make_unique<Impl>(box, eps, config);
}

BoStepper::~BoStepper() = default;

double BoStepper::cfl_number(const SolverState& s) const {
  return impl_->cfg.dt * 2.0 * max_abs(s.u) * impl_->k_cut;
}

void BoStepper::step(SolverState& s) const { advance(s, 1); }

void BoStepper::advance(SolverState& s, long steps) const {
  const auto& im = *impl_;
  if (s.box.n_modes != im.n || s.box.half_width != im.box.half_width || s.eps != im.eps)
    throw ValidationError("solver: state does not match the stepper's box or eps");
  if (steps <= 0) return;
  const double cfl = cfl_number(s);
  if (cfl > im.cfg.cfl_limit) {
    std::ostringstream os;
    os << "solver: dt * 2 max|u| * k_max = " << cfl << " exceeds the stability bound "
       << im.cfg.cfl_limit << "; reduce dt";
    throw ValidationError(os.str());
  }
  CVec v;
  im.plans.forward(s.u, v);
  for (long i = 0; i < steps; ++i) {
    if (im.cfg.integrator == Integrator::ETDRK4) im.step_etdrk4(v);
    else im.step_strang(v);
    if ((i & 63) == 63 || i + 1 == steps) {
      for (const auto& c : v)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
          std::ostringstream os;
          os << "solver: blow-up (non-finite spectrum) near t = " << s.time + (i + 1) * im.cfg.dt;
          throw NumericalFailure(os.str());
        }
    }
  }
  v[0] = v[0].real();
  v[im.n / 2] = v[im.n / 2].real();
  im.plans.backward(v, s.u);
  for (double& x : s.u) x /= im.n;
  s.time += double(steps) * im.cfg.dt;
}

SolverState step(const SolverState& s, const StepperConfig& config) {
  BoStepper st(s.box, s.eps, config);
  SolverState out = s;
  st.step(out);
  return out;
}

double l2_norm_sq(const SolverState& s) {
  double acc = 0.0;
  for (double v : s.u) acc += v * v;
  return acc * s.box.dx();
}

SolveReport solve_to(const SolverState& s0, double t_final, const StepperConfig& config) {
  if (!(t_final >= s0.time) || !std::isfinite(t_final))
    throw ValidationError("solver: t_final must be >= the current time");
  SolveReport rep;
  rep.state = s0;
  rep.l2_initial = std::sqrt(l2_norm_sq(s0));
  const double span = t_final - s0.time;
  const long full = long(std::floor(span / config.dt + 1e-9));
  const double rest = span - double(full) * config.dt;
  if (full > 0) {
    BoStepper st(s0.box, s0.eps, config);
    rep.max_cfl = st.cfl_number(rep.state);
    st.advance(rep.state, full);
    rep.max_cfl = std::max(rep.max_cfl, st.cfl_number(rep.state));
  }
  if (rest > 1e-12 * std::max(1.0, t_final)) {
    StepperConfig last = config;
    last.dt = rest;
    BoStepper st(s0.box, s0.eps, last);
    st.advance(rep.state, 1);
  }
  rep.state.time = t_final;
  rep.steps = full + (rest > 1e-12 * std::max(1.0, t_final) ? 1 : 0);
  rep.l2_final = std::sqrt(l2_norm_sq(rep.state));
  const double n0 = rep.l2_initial * rep.l2_initial;
  rep.relative_drift = n0 > 0.0 ? std::abs(rep.l2_final * rep.l2_final - n0) / n0 : 0.0;
  rep.drift_per_unit_time = span > 0.0 ? rep.relative_drift / span : 0.0;
  const int n = s0.box.n_modes, edge = std::max(1, n / 40);
  for (int j = 0; j < edge; ++j)
    rep.edge_max = std::max({rep.edge_max, std::abs(rep.state.u[j]), std::abs(rep.state.u[n - 1 - j])});
  return rep;
}

SolveReport solve_to(const RealLineFunction& u0, double t_final, double eps, const Box& box,
                     const StepperConfig& config, double box_tol) {
  return solve_to(initial_state(u0, eps, box, box_tol), t_final, config);
}

double weak_pairing(const SolverState& s, const RealLineFunction& phi) {
  if (phi.is_zero()) return 0.0;
  double acc = 0.0;
  for (int j = 0; j < s.box.n_modes; ++j) acc += s.u[j] * phi(s.box.x(j));
  return acc * s.box.dx();
}

double weak_pairing_refined(const SolverState& s, const RealLineFunction& phi, int factor) {
  if (factor < 1) throw ValidationError("weak_pairing_refined: factor must be >= 1");
  if (phi.is_zero()) return 0.0;
  const int n = s.box.n_modes, nf = n * factor;
  Plans coarse(n), fine(nf);
  CVec v;
  coarse.forward(s.u, v);
  CVec vf(std::size_t(nf / 2 + 1), cplx{});
  for (int j = 0; j < n / 2; ++j) vf[j] = v[j];
  vf[n / 2] = 0.5 * v[n / 2];  // split the Nyquist mode symmetrically
  std::vector<double> uf;
  fine.backward(vf, uf);
  const double dxf = s.box.dx() / factor;
  double acc = 0.0;
  for (int j = 0; j < nf; ++j) acc += uf[j] / n * phi(-s.box.half_width + dxf * j);
  return acc * dxf;
}

double interpolate(const SolverState& s, double x) {
  const int n = s.box.n_modes;
  Plans p(n);
  CVec v;
  p.forward(s.u, v);
  const double dk = kPi / s.box.half_width;
  const double y = x + s.box.half_width;
  double acc = v[0].real();
  for (int j = 1; j < n / 2; ++j) acc += 2.0 * (v[j] * std::exp(kI * (dk * j * y))).real();
  acc += v[n / 2].real() * std::cos(dk * (n / 2) * y);
  return acc / n;
}

double zd_pairing(const RealLineFunction& u0, double t, const RealLineFunction& phi, double window,
                  double tol) {
  if (u0.is_zero() || phi.is_zero()) return 0.0;
  std::vector<double> breaks = phi.line().breakpoints();
  if (t != 0.0 && u0.has_derivative()) {
    const auto K = critical_values(u0, t);
    breaks.insert(breaks.end(), K.values.begin(), K.values.end());
  }
  auto f = [&](double x) { return cplx(zd_real_line(u0, t, x).value * phi(x), 0.0); };
  quad::Options opt;
  opt.abs_tol = tol;
  opt.rel_tol = 1e-12;
  opt.max_evaluations = 20000;
  return quad::integrate(f, -window, window, breaks, opt).value.real();
}

std::vector<SweepRow> eps_sweep(const RealLineFunction& u0, double t,
                                const std::vector<double>& eps_list,
                                const std::vector<RealLineFunction>& phi_list,
                                const SweepOptions& opt) {
  if (eps_list.empty() || phi_list.empty()) throw ValidationError("eps_sweep: empty eps or phi list");
  for (double e : eps_list)
    if (!(e > 0.0)) throw ValidationError("eps_sweep: every eps must be > 0");
  if (!(t >= 0.0)) throw ValidationError("eps_sweep: t must be >= 0");
  std::vector<double> refs(phi_list.size());
  for (std::size_t p = 0; p < phi_list.size(); ++p)
    refs[p] = zd_pairing(u0, t, phi_list[p], opt.reference_window, opt.reference_tol);
  std::vector<std::vector<double>> pairings(eps_list.size());
  auto run = [&](std::size_t i) {
    const auto rep = solve_to(u0, t, eps_list[i], opt.box, opt.stepper);
    for (const auto& phi : phi_list) pairings[i].push_back(weak_pairing(rep.state, phi));
  };
  const int threads = std::max(1, std::min<int>(opt.threads, int(eps_list.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < eps_list.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(eps_list.size());
    std::size_t next = 0;
    std::mutex mu;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= eps_list.size()) return;
            i = next++;
          }
          try {
            run(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    for (std::size_t p = 0; p < phi_list.size(); ++p)
      rows.push_back({eps_list[i], int(p), pairings[i][p], refs[p], std::abs(pairings[i][p] - refs[p])});
  return rows;
}

std::vector<RealLineFunction> default_test_functions() {
  std::vector<RealLineFunction> out;
  auto gauss = [](double c, double s) {
    return make_test_function([=](double x) { const double y = (x - c) / s; return std::exp(-y * y); },
                              [=](double x) { const double y = (x - c) / s; return -2.0 * y / s * std::exp(-y * y); },
                              c, s, "gaussian-window");
  };
  out.push_back(gauss(0.0, 1.0));
  out.push_back(gauss(4.0, 2.0));
  const double c = 1.0, s = 2.0, w = 1.0;
  out.push_back(make_test_function(
      [=](double x) { const double y = (x - c) / s; return std::exp(-y * y) * std::cos(w * (x - c)); },
      [=](double x) {
        const double y = (x - c) / s;
        return std::exp(-y * y) * (-2.0 * y / s * std::cos(w * (x - c)) - w * std::sin(w * (x - c)));
      },
      c, s, "hermite-cosine"));
  return out;
}

void write_snapshot_csv(std::ostream& os, const SolverState& s, double dt) {
  os << std::setprecision(17);
  os << "# t=" << s.time << " eps=" << s.eps << " L=" << s.box.half_width
     << " n_modes=" << s.box.n_modes << " dt=" << dt << '\n';
  os << "x,u\n";
  for (int j = 0; j < s.box.n_modes; ++j) os << s.box.x(j) << ',' << s.u[j] << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "eps,phi_index,pairing,zd_reference,error\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << r.eps << ',' << r.phi_index << ',' << r.pairing << ',' << r.reference << ',' << r.error << '\n';
}

}  // namespace bozd
