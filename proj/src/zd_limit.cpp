#include "bozd/zd_limit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "bozd/quadrature.hpp"

namespace bozd {

namespace {

double scan_window(const RealLineFunction& u0) {
  return std::max(4.0 * u0.line().hints().extent, 50.0);
}

/// Principal Log(1 + w), accurate for small |w|. q = 1 + w is passed
/// separately because callers can form it without cancellation.
cplx log1p_principal(cplx w, cplx q) {
  if (std::abs(w) < 0.5) {
    const double re = 0.5 * std::log1p(2.0 * w.real() + std::norm(w));
    return {re, std::atan2(w.imag(), 1.0 + w.real())};
  }
  return std::log(q);
}

/// Sign-change roots of g on [a, b] at spacing h, polished by bisection.
template <class G>
std::vector<double> bracket_roots(G&& g, double a, double b, double h) {
  std::vector<double> roots;
  const long n = std::max(2L, long(std::ceil((b - a) / h)));
  double y0 = a, g0 = g(a);
  if (g0 == 0.0) roots.push_back(a);
  for (long i = 1; i <= n; ++i) {
    const double y1 = a + (b - a) * double(i) / double(n);
    const double g1 = g(y1);
    if (g1 == 0.0) {
      roots.push_back(y1);
    } else if (g0 != 0.0 && (g0 < 0.0) != (g1 < 0.0)) {
      double lo = y0, hi = y1, glo = g0;
      for (int it = 0; it < 200 && hi - lo > 4e-16 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((gm < 0.0) == (glo < 0.0)) lo = mid, glo = gm;
        else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    y0 = y1;
    g0 = g1;
  }
  return roots;
}

void check_growth(const RealLineFunction& u0, double t) {
  if (u0.growth() != GrowthClass::Linear) return;
  const double C = u0.growth_constant(scan_window(u0));
  if (2.0 * std::abs(t) * C >= 1.0) {
    std::ostringstream os;
    os << "regime refused: linear-growth data with C = " << C
       << " needs |t| < 1/(2C) = " << 0.5 / C << " (short-time regime); got t = " << t;
    throw RegimeRefusal(os.str());
  }
}

/// Roots of y + 2t u0(y) = x without the parity and simplicity checks.
std::vector<double> loose_roots(const RealLineFunction& u0, double t, double x) {
  if (t == 0.0 || u0.is_zero()) return {x};
  const double W = scan_window(u0);
  const double S = u0.sup_abs(W);
  double lip = 0.0;
  if (u0.has_derivative()) lip = u0.lipschitz(W);
  double h = std::min(1.0, 1.0 / (1.0 + 2.0 * std::abs(t) * lip)) / 4.0;
  h = std::min(h, u0.line().hints().min_width / 8.0);
  const double R = 2.0 * std::abs(t) * S + 1.0;
  return bracket_roots([&](double y) { return y + 2.0 * t * u0(y) - x; }, x - R, x + R, h);
}

}  // namespace

LogIntegralResult zd_log_integral(const RealLineFunction& u0, double t, const UpperHalfPoint& zp,
                                  const LogIntegralOptions& opt) {
  if (t == 0.0)
    throw ValidationError("zd_log_integral: t = 0 is excluded; use the projection Pi u0(z)");
  if (!std::isfinite(t)) throw ValidationError("zd_log_integral: t must be finite");
  LogIntegralResult res;
  if (u0.is_zero()) {
    res.method = "zero";
    return res;
  }
  check_growth(u0, t);
  const cplx z = zp.value();
  auto pts = u0.line().breakpoints();
  pts.push_back(z.real());
  pts.insert(pts.end(), opt.extra_breaks.begin(), opt.extra_breaks.end());
  const double scale = std::max(1.0, u0.line().hints().scale);
  quad::Options qo;
  qo.abs_tol = opt.abs_tol;
  qo.rel_tol = opt.rel_tol;
  qo.max_evaluations = opt.max_evaluations;
  const cplx pref = 1.0 / (4.0 * kI * kPi * t);

  double min_q = std::numeric_limits<double>::infinity();
  auto log_form = [&](double y) {
    const double u = u0(y);
    if (u == 0.0) return cplx{};
    const cplx d = y - z;
    const cplx w = 2.0 * t * u / d;
    const cplx q = (d + 2.0 * t * u) / d;
    min_q = std::min(min_q, std::abs(q));
    return log1p_principal(w, q);
  };
  auto s_form = [&](double y) {
    const double u = u0(y);
    if (u == 0.0) return cplx{};
    auto inner = [&](double s) { return u / (y - z + 2.0 * s * t * u); };
    quad::Options io;
    io.abs_tol = 1e-15;
    io.rel_tol = 1e-13;
    // 2t * int_0^1 u / (y - z + 2 s t u) ds equals Log(1 + w).
    return 2.0 * t * quad::integrate(inner, 0.0, 1.0, io).value;
  };

  quad::Result r;
  bool use_log = opt.mode != LogIntegralMode::DoubleIntegral;
  if (use_log) {
    r = quad::integrate_line(log_form, pts, scale, qo);
    res.method = "log";
    if (opt.mode == LogIntegralMode::Auto && min_q < 1e-8) use_log = false;
  }
  if (!use_log) {
    r = quad::integrate_line(s_form, pts, scale, qo);
    res.method = "double-integral";
  }
  if (!r.converged || !std::isfinite(r.value.real()) || !std::isfinite(r.value.imag())) {
    std::ostringstream os;
    os << "zd_log_integral: quadrature did not converge (error estimate " << r.error
       << ", worst subinterval [" << r.worst_a << ", " << r.worst_b << "])";
    throw NumericalFailure(os.str());
  }
  res.value = pref * r.value;
  res.error = std::abs(pref) * r.error;
  res.evaluations = r.evaluations;
  return res;
}

cplx cauchy_extension(const RealLineFunction& u0, const UpperHalfPoint& zp) {
  if (u0.is_zero()) return {};
  const cplx z = zp.value();
  auto pts = u0.line().breakpoints();
  pts.push_back(z.real());
  quad::Options qo;
  qo.abs_tol = 1e-14;
  qo.rel_tol = 1e-12;
  auto f = [&](double y) { return u0(y) / (y - z); };
  const auto r = quad::integrate_line(f, pts, std::max(1.0, u0.line().hints().scale), qo);
  return r.value / (2.0 * kI * kPi);
}

bool CriticalSet::contains(double x) const {
  return std::any_of(intervals.begin(), intervals.end(), [x](const Interval& i) { return i.contains(x); });
}

CriticalSet critical_values(const RealLineFunction& u0, double t, const Tolerances& tol) {
  CriticalSet k;
  k.t = t;
  k.crit_tol = tol.crit_scale * (1.0 + std::abs(t));
  if (t == 0.0 || u0.is_zero()) return k;
  if (!u0.has_derivative()) throw RegimeRefusal("critical_values: family exposes no derivative");
  const auto& hints = u0.line().hints();
  const double R = 2.0 * hints.extent + 1.0;
  const double h = std::min(hints.min_width / 200.0, 2.0 * R / 2e5);
  auto phi = [&](double y) { return 1.0 + 2.0 * t * *u0.derivative(y); };
  k.fold_points = bracket_roots(phi, -R, R, h);
  for (double y : k.fold_points) k.values.push_back(y + 2.0 * t * u0(y));
  std::sort(k.values.begin(), k.values.end());
  for (double c : k.values) k.intervals.push_back({c - k.crit_tol, c + k.crit_tol});
  return k;
}

double first_critical_time(const RealLineFunction& u0) {
  if (u0.is_zero() || !u0.has_derivative()) return std::numeric_limits<double>::infinity();
  const auto& hints = u0.line().hints();
  const double R = 2.0 * hints.extent + 1.0;
  const int n = 400001;
  const double h = 2.0 * R / (n - 1);
  double best = 0.0, arg = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = -R + h * i;
    const double v = -*u0.derivative(y);
    if (v > best) best = v, arg = y;
  }
  if (best <= 0.0) return std::numeric_limits<double>::infinity();
  // Golden-section polish of max(-u0') around the sampled maximum.
  double a = arg - h, b = arg + h;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double c = b - gr * (b - a), d = a + gr * (b - a);
    if (-*u0.derivative(c) > -*u0.derivative(d)) b = d;
    else a = c;
  }
  best = std::max(best, -*u0.derivative(0.5 * (a + b)));
  return 0.5 / best;
}

BranchSet branch_roots(const RealLineFunction& u0, double t, double x, const Tolerances& tol) {
  BranchSet bs;
  bs.x = x;
  bs.t = t;
  if (!u0.is_zero() && !u0.traits().c1_with_decay)
    throw RegimeRefusal("branch formula requires C1 data with decay; " + u0.traits().description +
                        " is outside that class");
  if (t == 0.0 || u0.is_zero()) {
    bs.roots = {x};
    bs.derivative_margins = {1.0};
    return bs;
  }
  if (!u0.has_derivative()) throw RegimeRefusal("branch_roots: family exposes no derivative");
  const auto K = critical_values(u0, t, tol);
  if (K.contains(x)) {
    std::ostringstream os;
    os << "near-critical x = " << x << ": within crit_tol " << K.crit_tol
       << " of a critical value of y + 2t u0(y) at t = " << t;
    throw NumericalFailure(os.str());
  }
  auto g = [&](double y) { return y + 2.0 * t * u0(y) - x; };
  auto dg = [&](double y) { return 1.0 + 2.0 * t * *u0.derivative(y); };
  auto roots = loose_roots(u0, t, x);
  for (double& y : roots) {
    for (int it = 0; it < 8; ++it) {
      const double gy = g(y);
      if (std::abs(gy) <= tol.root) break;
      const double step = gy / dg(y);
      if (!std::isfinite(step) || std::abs(step) > 1e-6 * (1.0 + std::abs(y))) break;
      y -= step;
    }
    if (std::abs(g(y)) > tol.root * (1.0 + std::abs(x))) {
      std::ostringstream os;
      os << "branch_roots: root at y = " << y << " only reached |residual| = " << std::abs(g(y));
      throw NumericalFailure(os.str());
    }
    bs.derivative_margins.push_back(std::abs(dg(y)));
  }
  std::sort(roots.begin(), roots.end());
  bs.roots = roots;
  const bool odd = roots.size() % 2 == 1;
  const bool simple = std::all_of(bs.derivative_margins.begin(), bs.derivative_margins.end(),
                                  [&](double d) { return d >= tol.simple; });
  if (!odd || !simple) {
    std::ostringstream os;
    os << "near-critical x = " << x << ": found " << roots.size() << " roots"
       << (simple ? "" : " with a non-simple root") << "; move x or refine";
    throw NumericalFailure(os.str());
  }
  bs.ell = int(roots.size() / 2);
  return bs;
}

double branch_zd(const RealLineFunction& u0, double t, double x, const Tolerances& tol) {
  if (u0.is_zero()) return 0.0;
  const auto bs = branch_roots(u0, t, x, tol);
  double acc = 0.0, sign = 1.0;
  for (double y : bs.roots) {
    acc += sign * u0(y);
    sign = -sign;
  }
  return acc;
}

std::vector<double> default_delta_schedule() {
  std::vector<double> d;
  for (int k = 0; k <= 6; ++k) d.push_back(0.1 * std::ldexp(1.0, -k));
  return d;
}

RealLineValue zd_real_line(const RealLineFunction& u0, double t, double x,
                           const std::vector<double>& schedule, int order) {
  if (schedule.empty()) throw ValidationError("zd_real_line: empty delta schedule");
  for (std::size_t k = 0; k < schedule.size(); ++k)
    if (!(schedule[k] > 0.0) || (k > 0 && !(schedule[k] < schedule[k - 1])))
      throw ValidationError("zd_real_line: delta schedule must be positive and decreasing");
  if (order < 0) throw ValidationError("zd_real_line: richardson order must be >= 0");
  RealLineValue out;
  out.deltas = schedule;
  if (u0.is_zero()) {
    out.samples.assign(schedule.size(), 0.0);
    return out;
  }
  LogIntegralOptions opt;
  if (t != 0.0) opt.extra_breaks = loose_roots(u0, t, x);
  for (double d : schedule) {
    const UpperHalfPoint z(x, d);
    const cplx v = t == 0.0 ? cauchy_extension(u0, z) : zd_log_integral(u0, t, z, opt).value;
    out.samples.push_back(2.0 * v.real());
  }
  // Richardson tableau for an expansion in powers of delta; the schedule is
  // assumed to halve, the ratio is read off the first two entries.
  const std::size_t K = schedule.size();
  const double ratio = K > 1 ? schedule[0] / schedule[1] : 2.0;
  std::vector<std::vector<double>> T(K);
  for (std::size_t k = 0; k < K; ++k) {
    T[k].push_back(out.samples[k]);
    for (int j = 1; j <= order && std::size_t(j) <= k; ++j) {
      const double f = std::pow(ratio, j) - 1.0;
      T[k].push_back(T[k][j - 1] + (T[k][j - 1] - T[k - 1][j - 1]) / f);
    }
  }
  const int col = int(std::min<std::size_t>(order, K - 1));
  out.value = T[K - 1][col];
  std::vector<double> resid;
  for (std::size_t k = col + 1; k < K; ++k) resid.push_back(std::abs(T[k][col] - T[k - 1][col]));
  out.estimated_error = resid.empty() ? 0.0 : resid.back();
  for (std::size_t k = 1; k < resid.size(); ++k)
    if (resid[k] > resid[k - 1] && resid[k] > 1e-12 * (1.0 + std::abs(out.value))) out.warning = true;
  return out;
}

void write_profile_csv(std::ostream& os, const std::vector<ProfileRow>& rows) {
  os << "x,zd_branch,zd_boundary,n_branches,flag\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.x << ',';
    if (std::isnan(r.zd_branch)) os << "nan";
    else os << r.zd_branch;
    os << ',' << r.zd_boundary << ',' << r.n_branches << ',' << r.flag << '\n';
  }
}

std::string critical_set_json(const CriticalSet& k) {
  nlohmann::ordered_json j;
  j["t"] = k.t;
  j["crit_tol"] = k.crit_tol;
  j["fold_points"] = k.fold_points;
  j["critical_values"] = k.values;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& i : k.intervals) arr.push_back({i.lo, i.hi});
  j["intervals"] = arr;
  return j.dump(2);
}

}  // namespace bozd
