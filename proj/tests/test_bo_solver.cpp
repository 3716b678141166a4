#include <doctest.h>

#include <cmath>
#include <sstream>

#include <fftw3.h>

#include "bozd/bo_solver.hpp"
#include "bozd/families.hpp"

using namespace bozd;

namespace {

double max_diff(const SolverState& a, const SolverState& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.u.size(); ++j) d = std::max(d, std::abs(a.u[j] - b.u[j]));
  return d;
}

double max_abs(const SolverState& a) {
  double d = 0.0;
  for (double v : a.u) d = std::max(d, std::abs(v));
  return d;
}

}  // namespace

TEST_CASE("box and initial state validation") {
  CHECK_THROWS_AS((Box{-1.0, 512}.validate()), ValidationError);
  CHECK_THROWS_AS((Box{10.0, 500}.validate()), ValidationError);
  CHECK_NOTHROW((Box{10.0, 512}.validate()));
  const auto g = families::gaussian(1.0, 1.0);
  CHECK_THROWS_AS(initial_state(g, 0.0, Box{20.0, 512}), ValidationError);
  // A Lorentzian has not decayed at the edge of a small box.
  CHECK_THROWS_AS(initial_state(families::lorentzian(1.0), 1.0, Box{10.0, 512}), ValidationError);
  const auto s = initial_state(g, 1.0, Box{20.0, 512});
  CHECK(s.u[256] == doctest::Approx(1.0));
  StepperConfig bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(BoStepper(Box{20.0, 512}, 1.0, bad), ValidationError);
}

TEST_CASE("zero data and zero time") {
  StepperConfig cfg;
  const auto z = solve_to(families::zero(), 1.0, 0.5, Box{20.0, 256}, cfg);
  CHECK(max_abs(z.state) == 0.0);
  const auto g = families::gaussian(1.0, 1.0);
  const auto s0 = solve_to(g, 0.0, 0.5, Box{20.0, 256}, cfg);
  CHECK(s0.steps == 0);
  CHECK(max_diff(s0.state, initial_state(g, 0.5, Box{20.0, 256})) == 0.0);
  CHECK_THROWS_AS(solve_to(s0.state, -1.0, cfg), ValidationError);
}

TEST_CASE("linear flow matches the exact phase") {
  const Box box{20.0, 512};
  const double eps = 0.7, t = 0.9;
  StepperConfig cfg;
  cfg.nonlinear = false;
  cfg.dt = 0.01;
  const auto g = families::gaussian(1.0, 1.0);
  const auto rep = solve_to(g, t, eps, box, cfg);
  // Exact: each mode picks up e^{i eps k|k| t}.
  const int n = box.n_modes;
  auto s0 = initial_state(g, eps, box);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  std::vector<double> u = s0.u;
  auto* fwd = fftw_plan_dft_r2c_1d(n, u.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                   FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);
  for (int k = 0; k <= n / 2; ++k) {
    const double kk = kPi * k / box.half_width;
    spec[k] *= std::exp(cplx(0.0, eps * kk * kk * t)) / double(n);
  }
  std::vector<double> ref(n);
  auto* inv = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), ref.data(),
                                   FFTW_ESTIMATE);
  fftw_execute(inv);
  fftw_destroy_plan(inv);
  double d = 0.0;
  for (int j = 0; j < n; ++j) d = std::max(d, std::abs(ref[j] - rep.state.u[j]));
  CHECK(d <= 1e-12);
}

TEST_CASE("L2 conservation") {
  StepperConfig cfg;
  const auto rep = solve_to(families::gaussian(1.0, 1.0), 1.0, 0.2, Box{40.0, 2048}, cfg);
  CHECK(rep.drift_per_unit_time <= 1e-8);
  CHECK(rep.l2_initial == doctest::Approx(std::sqrt(std::sqrt(kPi / 2.0))).epsilon(1e-10));
}

TEST_CASE("ETDRK4 self-convergence order") {
  const auto g = families::gaussian(1.0, 1.0);
  const Box box{20.0, 512};
  std::vector<SolverState> sol;
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    StepperConfig cfg;
    cfg.dt = dt;
    sol.push_back(solve_to(g, 0.4, 1.0, box, cfg).state);
  }
  const double e1 = max_diff(sol[0], sol[1]), e2 = max_diff(sol[1], sol[2]);
  const double order = std::log2(e1 / e2);
  MESSAGE("observed order " << order);
  CHECK(order >= 3.5);
  // Strang is second order.
  std::vector<SolverState> st;
  for (double dt : {0.01, 0.005, 0.0025}) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.integrator = Integrator::Strang;
    st.push_back(solve_to(g, 0.4, 1.0, box, cfg).state);
  }
  const double s_order = std::log2(max_diff(st[0], st[1]) / max_diff(st[1], st[2]));
  CHECK(s_order == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("scaling identity u_eps(t, x) = eps v(eps t, x)") {
  const double eps = 0.5, t = 0.4;
  const Box box{20.0, 1024};
  StepperConfig cfg;
  cfg.dt = 1e-3;
  const auto u = solve_to(families::gaussian(1.0, 1.0), t, eps, box, cfg).state;
  StepperConfig cfg2 = cfg;
  cfg2.dt = eps * cfg.dt;
  const auto v = solve_to(families::gaussian(1.0 / eps, 1.0), eps * t, 1.0, box, cfg2).state;
  double d = 0.0;
  for (std::size_t j = 0; j < u.u.size(); ++j) d = std::max(d, std::abs(u.u[j] - eps * v.u[j]));
  CHECK(d <= 1e-6);
}

TEST_CASE("CFL guard") {
  StepperConfig cfg;
  cfg.dt = 0.5;
  CHECK_THROWS_AS(solve_to(families::gaussian(1.0, 1.0), 1.0, 0.1, Box{20.0, 1024}, cfg),
                  ValidationError);
}

TEST_CASE("weak pairings") {
  const auto g = families::gaussian(1.0, 1.0);
  StepperConfig cfg;
  const auto s = solve_to(g, 0.5, 0.3, Box{20.0, 1024}, cfg).state;
  const auto phi = families::gaussian(1.0, 2.0, 1.0);
  const double p = weak_pairing(s, phi), r = weak_pairing_refined(s, phi, 2);
  CHECK(std::abs(p - r) <= 1e-8);
  CHECK(weak_pairing(s, families::zero()) == 0.0);
  CHECK(weak_pairing(initial_state(families::zero(), 0.3, Box{20.0, 256}), phi) == 0.0);
  CHECK_THROWS_AS(weak_pairing_refined(s, phi, 0), ValidationError);
  // Band-limited interpolation reproduces grid values.
  CHECK(interpolate(s, s.box.x(300)) == doctest::Approx(s.u[300]).epsilon(1e-12));
}

TEST_CASE("doubling the box leaves pairings unchanged") {
  const auto g = families::gaussian(1.0, 1.0);
  const auto phi = families::gaussian(1.0, 2.0, 1.0);
  StepperConfig cfg;
  const auto a = solve_to(g, 2.0, 0.3, Box{40.0, 2048}, cfg).state;
  const auto b = solve_to(g, 2.0, 0.3, Box{80.0, 4096}, cfg).state;
  CHECK(std::abs(weak_pairing(a, phi) - weak_pairing(b, phi)) <= 1e-6);
}

TEST_CASE("eps sweep degenerate cases") {
  SweepOptions opt;
  opt.box = Box{20.0, 1024};
  const std::vector<RealLineFunction> phis{families::gaussian(1.0, 1.0)};
  const auto z = eps_sweep(families::zero(), 1.0, {0.2, 0.1}, phis, opt);
  for (const auto& r : z) CHECK(r.error == 0.0);
  // At t = 0 every eps returns <u0, phi>.
  const auto s0 = eps_sweep(families::gaussian(1.0, 1.0), 0.0, {0.2, 0.1}, phis, opt);
  for (const auto& r : s0) CHECK(r.error <= 1e-6);
  CHECK(s0[0].reference == doctest::Approx(std::sqrt(kPi / 2.0)).epsilon(1e-6));
  CHECK_THROWS_AS(eps_sweep(families::zero(), 1.0, {}, phis, opt), ValidationError);
  CHECK_THROWS_AS(eps_sweep(families::zero(), 1.0, {-0.1}, phis, opt), ValidationError);
  CHECK_THROWS_AS(eps_sweep(families::zero(), -1.0, {0.1}, phis, opt), ValidationError);
  CHECK(default_test_functions().size() == 3);
}

TEST_CASE("snapshot and sweep csv") {
  const auto s = initial_state(families::gaussian(1.0, 1.0), 1.0, Box{10.0, 64});
  std::ostringstream os;
  write_snapshot_csv(os, s, 1e-3);
  const auto text = os.str();
  CHECK(text.find("x,u") != std::string::npos);
  std::ostringstream sw;
  write_sweep_csv(sw, {{0.1, 0, 1.0, 1.1, 0.1}});
  CHECK(sw.str().find("eps") != std::string::npos);
}
