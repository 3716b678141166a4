#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bozd/hardy.hpp"

namespace bozd {

enum class LogIntegralMode { Auto, Log, DoubleIntegral };

struct LogIntegralOptions {
  LogIntegralMode mode = LogIntegralMode::Auto;
  double abs_tol = 1e-13;
  double rel_tol = 1e-11;
  int max_evaluations = 4'000'000;
  /// Extra quadrature breakpoints, typically the real roots of
  /// y + 2t u0(y) = Re z.
  std::vector<double> extra_breaks;
};

struct LogIntegralResult {
  cplx value{};
  double error = 0.0;
  long evaluations = 0;
  std::string method;
};

/// (1/4i pi t) int Log(1 + 2t u0(y)/(y - z)) dy. Refuses t = 0 and
/// linear-growth data outside |t| < 1/(2C).
LogIntegralResult zd_log_integral(const RealLineFunction& u0, double t, const UpperHalfPoint& z,
                                  const LogIntegralOptions& opt = {});

/// (1/2i pi) int u0(y)/(y - z) dy, the Cauchy form of Pi u0(z).
cplx cauchy_extension(const RealLineFunction& u0, const UpperHalfPoint& z);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct CriticalSet {
  double t = 0.0;
  /// Zeros of 1 + 2t u0'(y)
  std::vector<double> fold_points;
  /// Their images y + 2t u0(y), sorted
  std::vector<double> values;
  /// values inflated by crit_tol
  std::vector<Interval> intervals;
  double crit_tol = 0.0;
  bool contains(double x) const;
};

CriticalSet critical_values(const RealLineFunction& u0, double t, const Tolerances& tol = {});

/// Smallest t > 0 at which 1 + 2t u0' acquires a zero; +inf if never.
double first_critical_time(const RealLineFunction& u0);

struct BranchSet {
  double x = 0.0;
  double t = 0.0;
  std::vector<double> roots;
  int ell = 0;
  std::vector<double> derivative_margins;
};

/// All real roots of y + 2t u0(y) = x.
BranchSet branch_roots(const RealLineFunction& u0, double t, double x, const Tolerances& tol = {});

/// sum_k (-1)^k u0(y_k).
double branch_zd(const RealLineFunction& u0, double t, double x, const Tolerances& tol = {});

struct RealLineValue {
  double value = 0.0;
  double estimated_error = 0.0;
  /// Richardson residuals did not decrease monotonically.
  bool warning = false;
  std::vector<double> deltas;
  /// 2 Re of the holomorphic value at x + i delta_k
  std::vector<double> samples;
};

std::vector<double> default_delta_schedule();

/// 2 Re Pi ZD(t, x + i delta) extrapolated to delta = 0.
RealLineValue zd_real_line(const RealLineFunction& u0, double t, double x,
                           const std::vector<double>& delta_schedule = default_delta_schedule(),
                           int richardson_order = 2);

struct ProfileRow {
  double x = 0.0;
  /// NaN when the branch formula was not evaluated
  double zd_branch = 0.0;
  double zd_boundary = 0.0;
  int n_branches = 0;
  std::string flag;
};

void write_profile_csv(std::ostream& os, const std::vector<ProfileRow>& rows);
std::string critical_set_json(const CriticalSet& k);

}  // namespace bozd
