#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <vector>

#include "bozd/line_function.hpp"

namespace bozd {

/// Periodic box [-L, L) with n_modes samples.
struct Box {
  double half_width = 40.0;
  int n_modes = 4096;

  void validate() const;
  double dx() const { return 2.0 * half_width / n_modes; }
  double x(int j) const { return -half_width + dx() * j; }
};

struct SolverState {
  Box box;
  std::vector<double> u;
  double time = 0.0;
  double eps = 1.0;
};

enum class Integrator { ETDRK4, Strang };

struct StepperConfig {
  double dt = 1e-3;
  /// Fraction of the resolved wavenumbers kept in the quadratic term.
  double dealias = 2.0 / 3.0;
  Integrator integrator = Integrator::ETDRK4;
  /// Test switch: drop -d/dx(u^2) and evolve the linear flow only.
  bool nonlinear = true;
  /// Stability bound on dt * 2 max|u| * k_max for the explicit part.
  double cfl_limit = 2.5;
};

/// Samples u0 on the box. Throws ValidationError when |u0| at the box edge
/// exceeds box_tol times its maximum.
SolverState initial_state(const RealLineFunction& u0, double eps, const Box& box,
                          double box_tol = 1e-8);

/// Stepper for u_t = d/dx(eps |D| u - u^2) with precomputed transforms and
/// exponential coefficients. One instance per (box, eps, config).
class BoStepper {
 public:
  BoStepper(const Box& box, double eps, const StepperConfig& config);
  ~BoStepper();
  BoStepper(const BoStepper&) = delete;
  BoStepper& operator=(const BoStepper&) = delete;

  void step(SolverState& s) const;
  /// Advance by n steps of dt.
  void advance(SolverState& s, long n) const;
  /// dt * 2 max|u| * k_max, compared against cfl_limit.
  double cfl_number(const SolverState& s) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One step of size config.dt.
SolverState step(const SolverState& s, const StepperConfig& config);

struct SolveReport {
  SolverState state;
  long steps = 0;
  double l2_initial = 0.0;
  double l2_final = 0.0;
  /// |l2_final^2 - l2_initial^2| / l2_initial^2
  double relative_drift = 0.0;
  double drift_per_unit_time = 0.0;
  /// max |u| over the outer 5% of the box at the final time
  double edge_max = 0.0;
  double max_cfl = 0.0;
};

/// Integrates to t_final with steps of config.dt (the last step is
/// shortened to land on t_final).
SolveReport solve_to(const RealLineFunction& u0, double t_final, double eps, const Box& box,
                     const StepperConfig& config, double box_tol = 1e-8);
SolveReport solve_to(const SolverState& s0, double t_final, const StepperConfig& config);

/// Discrete L2 norm squared, dx * sum u_j^2.
double l2_norm_sq(const SolverState& s);

/// dx * sum u_j phi(x_j)
double weak_pairing(const SolverState& s, const RealLineFunction& phi);
/// Same pairing after spectral interpolation of u onto a grid `factor`
/// times finer.
double weak_pairing_refined(const SolverState& s, const RealLineFunction& phi, int factor = 2);

/// Band-limited interpolant of the state at arbitrary x.
double interpolate(const SolverState& s, double x);

struct SweepRow {
  double eps = 0.0;
  int phi_index = 0;
  double pairing = 0.0;
  double reference = 0.0;
  double error = 0.0;
};

struct SweepOptions {
  Box box{20.0, 4096};
  StepperConfig stepper{};
  /// Half-width of the x range on which <ZD(t), phi> is integrated.
  double reference_window = 20.0;
  double reference_tol = 1e-8;
  int threads = 1;
};

/// <ZD(t), phi> by adaptive quadrature of the boundary reconstruction.
double zd_pairing(const RealLineFunction& u0, double t, const RealLineFunction& phi,
                  double window = 20.0, double tol = 1e-8);

std::vector<SweepRow> eps_sweep(const RealLineFunction& u0, double t,
                                const std::vector<double>& eps_list,
                                const std::vector<RealLineFunction>& phi_list,
                                const SweepOptions& opt = {});

/// Default test functions for weak-convergence studies: Gaussians and a
/// Hermite-windowed cosine.
std::vector<RealLineFunction> default_test_functions();

void write_snapshot_csv(std::ostream& os, const SolverState& s, double dt);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace bozd
