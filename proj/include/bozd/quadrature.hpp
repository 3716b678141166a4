#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "bozd/common.hpp"

namespace bozd::quad {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule gauss_legendre(int n);

/// Same rule mapped to [0, 1].
GaussRule gauss_legendre_unit(int n);

struct Options {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_evaluations = 2'000'000;
};

struct Result {
  cplx value{};
  double error = 0.0;
  long evaluations = 0;
  bool converged = false;
  /// Physical-space endpoints of the subinterval with the largest error
  /// estimate when the run stopped.
  double worst_a = 0.0;
  double worst_b = 0.0;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

/// Change of variables attached to a piece of the integration domain.
/// Tail maps send theta in [0, pi/2) to y = base +/- scale * tan(theta).
enum class Map { Identity, TanRight, TanLeft };

struct Piece {
  double a = 0.0;
  double b = 0.0;
  Map map = Map::Identity;
  double base = 0.0;
  double scale = 1.0;
  cplx value{};
  double error = 0.0;
  bool operator<(const Piece& o) const { return error < o.error; }
};

inline double to_physical(const Piece& p, double s) {
  switch (p.map) {
    case Map::Identity: return s;
    case Map::TanRight: return p.base + p.scale * std::tan(s);
    case Map::TanLeft: return p.base - p.scale * std::tan(s);
  }
  return s;
}

template <class F>
void gk15(F& f, Piece& p) {
  const double c = 0.5 * (p.a + p.b);
  const double h = 0.5 * (p.b - p.a);
  auto eval = [&](double s) -> cplx {
    if (p.map == Map::Identity) return f(s);
    const double tn = std::tan(s);
    const double jac = p.scale * (1.0 + tn * tn);
    const double y = p.map == Map::TanRight ? p.base + p.scale * tn
                                            : p.base - p.scale * tn;
    return f(y) * jac;
  };
  std::array<cplx, 15> vals;
  vals[7] = eval(c);
  for (int k = 0; k < 7; ++k) {
    vals[k] = eval(c - h * kXgk[k]);
    vals[14 - k] = eval(c + h * kXgk[k]);
  }
  cplx kron = kWgk[7] * vals[7];
  cplx gauss = kWg[3] * vals[7];
  for (int k = 0; k < 7; ++k) {
    kron += kWgk[k] * (vals[k] + vals[14 - k]);
    if (k % 2 == 1) gauss += kWg[k / 2] * (vals[k] + vals[14 - k]);
  }
  const cplx mean = kron * 0.5;
  double resasc = kWgk[7] * std::abs(vals[7] - mean);
  for (int k = 0; k < 7; ++k)
    resasc += kWgk[k] * (std::abs(vals[k] - mean) + std::abs(vals[14 - k] - mean));
  resasc *= std::abs(h);
  kron *= h;
  gauss *= h;
  double err = std::abs(kron - gauss);
  if (resasc > 0.0 && err > 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  p.value = kron;
  p.error = err;
}

template <class F>
Result run(F&& f, std::vector<Piece> pieces, const Options& opt) {
  Result res;
  std::priority_queue<Piece> heap;
  cplx total{};
  double total_err = 0.0;
  for (auto& p : pieces) {
    gk15(f, p);
    res.evaluations += 15;
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }
  while (!heap.empty()) {
    const double tol = std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    if (total_err <= tol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= opt.max_evaluations) break;
    Piece worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted
    heap.pop();
    Piece left = worst, right = worst;
    left.b = mid;
    right.a = mid;
    gk15(f, left);
    gk15(f, right);
    res.evaluations += 30;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to drop accumulated cancellation in the running total.
  total = {};
  total_err = 0.0;
  double worst_err = -1.0;
  std::vector<Piece> rest;
  rest.reserve(heap.size());
  while (!heap.empty()) {
    rest.push_back(heap.top());
    heap.pop();
  }
  std::sort(rest.begin(), rest.end(),
            [](const Piece& x, const Piece& y) { return x.a < y.a; });
  for (const auto& p : rest) {
    total += p.value;
    total_err += p.error;
    if (p.error > worst_err) {
      worst_err = p.error;
      res.worst_a = to_physical(p, p.a);
      res.worst_b = to_physical(p, p.b);
    }
  }
  res.value = total;
  res.error = total_err;
  if (!res.converged)
    res.converged = total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  return res;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) on a finite interval.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  if (a == b) return Result{{}, 0.0, 0, true, a, b};
  std::vector<detail::Piece> pieces{{a, b}};
  return detail::run(f, std::move(pieces), opt);
}

/// Finite interval split at interior breakpoints (kinks, peaks).
template <class F>
Result integrate(F&& f, double a, double b, std::span<const double> breaks,
                 const Options& opt = {}) {
  std::vector<double> pts{a};
  for (double x : breaks)
    if (x > a && x < b) pts.push_back(x);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<detail::Piece> pieces;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) pieces.push_back({pts[k], pts[k + 1]});
  return detail::run(f, std::move(pieces), opt);
}

/// Integral over [a, +inf) using y = a + scale * tan(theta).
template <class F>
Result integrate_right_tail(F&& f, double a, double scale = 1.0,
                            const Options& opt = {}) {
  std::vector<detail::Piece> pieces{
      {0.0, 0.5 * kPi, detail::Map::TanRight, a, scale}};
  return detail::run(f, std::move(pieces), opt);
}

/// Integral over the whole real line. The interval spanned by the sorted
/// breakpoints is integrated directly, the two tails through the tangent
/// compactification.
template <class F>
Result integrate_line(F&& f, std::span<const double> breaks, double scale = 1.0,
                      const Options& opt = {}) {
  std::vector<double> pts(breaks.begin(), breaks.end());
  if (pts.empty()) pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<detail::Piece> pieces;
  pieces.push_back({0.0, 0.5 * kPi, detail::Map::TanLeft, pts.front(), scale});
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) pieces.push_back({pts[k], pts[k + 1]});
  pieces.push_back({0.0, 0.5 * kPi, detail::Map::TanRight, pts.back(), scale});
  return detail::run(f, std::move(pieces), opt);
}

/// Evenly spaced points in [a, b], inclusive.
std::vector<double> linspace(double a, double b, int n);

}  // namespace bozd::quad
