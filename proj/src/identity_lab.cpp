#include "bozd/identity_lab.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bozd/hardy.hpp"
#include "bozd/quadrature.hpp"

namespace bozd::identity {

namespace {

double sup_on(const LineFunction& f, double lo, double hi, int n) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k) s = std::max(s, std::abs(f(lo + (hi - lo) * k / n)));
  return s;
}

/// int_{|y| <= R} |f|^p split at the feature points.
double windowed_norm(const LineFunction& f, double R, int p) {
  auto pts = f.breakpoints();
  auto g = [&](double y) { return cplx(std::pow(std::abs(f(y)), p), 0.0); };
  quad::Options opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-10;
  return quad::integrate(g, -R, R, pts, opt).value.real();
}

/// int_0^inf g(sign * s) ds with the finite part split at `breaks`.
cplx half_line(const std::function<cplx(double)>& g, double sign, std::vector<double> breaks,
               double edge, double scale, const quad::Options& opt, bool* ok) {
  std::vector<double> inside;
  for (double b : breaks) {
    const double s = sign * b;
    if (s > 0.0 && s < edge) inside.push_back(s);
  }
  auto gs = [&](double s) { return g(sign * s); };
  const auto a = quad::integrate(gs, 0.0, edge, inside, opt);
  const auto b = quad::integrate_right_tail(gs, edge, scale, opt);
  if (ok && (!a.converged || !b.converged)) *ok = false;
  return a.value + b.value;
}

struct Tensor {
  const LineFunction& f;
  int n;
  std::vector<int> signs;  // +1 / -1 per coordinate
  quad::Options opt;
  bool ok = true;

  cplx level(int k, double prev) {
    const auto& hints = f.hints();
    std::vector<double> br;
    for (double c : hints.features) {
      br.push_back(prev + c);
      if (k == n - 1) br.push_back(-c);
    }
    br.push_back(prev);
    auto g = [&](double y) -> cplx {
      const cplx a = f(y - prev);
      if (a == cplx{}) return {};
      if (k == n - 1) return a * f(-y);
      return a * level(k + 1, y);
    };
    const double edge = std::abs(prev) + hints.extent;
    return half_line(g, double(signs[k]), br, edge, std::max(hints.scale, 1.0), opt, &ok);
  }
};

/// Integrals over all 2^n orthants, indexed by the bitmask of negative
/// coordinates.
std::vector<cplx> orthant_integrals(const TestFunction& f, int n, double rel_tol, bool* ok) {
  const double sup = sup_on(f.f(), -f.f().hints().extent, f.f().hints().extent, 4000);
  const double width = std::max(f.f().hints().scale, 1.0);
  quad::Options opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = 1e-15 * std::pow(sup, n + 1) * std::pow(width, n);
  opt.max_evaluations = 200'000;
  std::vector<cplx> out(std::size_t(1) << n);
  for (std::size_t mask = 0; mask < out.size(); ++mask) {
    Tensor t{f.f(), n, std::vector<int>(std::size_t(n)), opt};
    for (int k = 0; k < n; ++k) t.signs[k] = (mask >> k) & 1 ? -1 : 1;
    out[mask] = t.level(0, 0.0);
    if (!t.ok) *ok = false;
  }
  return out;
}

double rel_err_of(cplx lhs, cplx rhs) {
  const double d = std::abs(lhs - rhs);
  const double s = std::abs(lhs);
  return s > 0.0 ? d / s : d;
}

IdentityRecord trivial(const TestFunction& f, std::string check, int n, int j) {
  IdentityRecord r;
  r.case_name = f.name();
  r.check = std::move(check);
  r.n = n;
  r.j = j;
  r.method = "trivial";
  return r;
}

void finish(IdentityRecord& r, const TestFunction& f, double tol) {
  r.rel_err = rel_err_of(r.lhs, r.rhs);
  if (r.status != Status::Inconclusive) {
    const bool pass = r.stderr_ > 0.0 ? std::abs(r.lhs - r.rhs) <= 3.0 * r.stderr_
                                      : r.rel_err <= tol;
    r.status = pass ? Status::Pass : Status::Fail;
  }
  if (!f.is_real()) {
    const std::string ext = "complex f: extension test";
    r.note = r.status == Status::Fail ? ext + ", outside stated hypotheses" : ext;
  }
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

struct QmcEstimate {
  cplx lhs{}, rhs{};
  double stderr_diff = 0.0;
  double stderr_lhs = 0.0;
};

QmcEstimate qmc_lemma(const TestFunction& f, int n, const CheckOptions& opt) {
  const double s = std::max(f.f().hints().scale, 1.0);
  int pts = 1;
  while (pts < opt.qmc_points) pts <<= 1;
  const int R = std::max(opt.qmc_replicates, 2);
  boost::random::mt19937_64 rng(opt.seed);
  boost::random::uniform_01<double> unif;
  std::vector<cplx> L(static_cast<std::size_t>(R)), D(static_cast<std::size_t>(R));
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> u(nn), shift(nn), y(nn);
  const double scale64 = std::ldexp(1.0, -64);
  auto chain = [&]() {
    cplx p = f(y[0]);
    for (int k = 1; k < n && p != cplx{}; ++k) p *= f(y[k] - y[k - 1]);
    return p == cplx{} ? p : p * f(-y[n - 1]);
  };
  for (int r = 0; r < R; ++r) {
    for (auto& v : shift) v = unif(rng);
    boost::random::sobol qrng(static_cast<std::size_t>(n));
    cplx full{}, orth{};
    for (int i = 0; i < pts; ++i) {
      for (int k = 0; k < n; ++k) {
        double v = double(qrng()) * scale64 + shift[k];
        v -= std::floor(v);
        u[k] = std::clamp(v, 1e-15, 1.0 - 1e-15);
      }
      double jac = 1.0;
      for (int k = 0; k < n; ++k) {
        const double th = kPi * (u[k] - 0.5);
        const double tn = std::tan(th);
        y[k] = s * tn;
        jac *= s * kPi * (1.0 + tn * tn);
      }
      full += chain() * jac;
      jac = 1.0;
      for (int k = 0; k < n; ++k) {
        const double tn = std::tan(0.5 * kPi * u[k]);
        y[k] = s * tn;
        jac *= 0.5 * s * kPi * (1.0 + tn * tn);
      }
      orth += chain() * jac;
    }
    L[r] = full / double(pts);
    D[r] = L[r] - double(n + 1) * orth / double(pts);
  }
  auto mean_sd = [R](const std::vector<cplx>& v, cplx& mean) {
    mean = {};
    for (auto x : v) mean += x;
    mean /= double(R);
    double var = 0.0;
    for (auto x : v) var += std::norm(x - mean);
    return std::sqrt(var / double(R - 1) / double(R));
  };
  QmcEstimate e;
  cplx dmean;
  e.stderr_lhs = mean_sd(L, e.lhs);
  e.stderr_diff = mean_sd(D, dmean);
  e.rhs = e.lhs - dmean;
  return e;
}

}  // namespace

std::string ClassTags::str() const {
  std::string s;
  auto add = [&](bool b, const char* n) {
    if (!b) return;
    if (!s.empty()) s += ',';
    s += n;
  };
  add(l1, "L1");
  add(l2, "L2");
  add(linf, "Linf");
  return s;
}

ClassTags measure_tags(const LineFunction& f, double window) {
  ClassTags t;
  if (f.is_zero()) return {true, true, true};
  for (int p : {1, 2}) {
    const double inner = windowed_norm(f, window, p);
    const double outer = windowed_norm(f, 2.0 * window, p);
    const bool ok = std::isfinite(outer) && outer - inner <= 1e-3 * outer;
    (p == 1 ? t.l1 : t.l2) = ok;
  }
  const int n = 40000;
  double inner = sup_on(f, -window, window, n);
  for (double c : f.hints().features)
    if (std::abs(c) <= window) inner = std::max(inner, std::abs(f(c)));
  const double outer = std::max(sup_on(f, -2.0 * window, -window, n / 2),
                                sup_on(f, window, 2.0 * window, n / 2));
  t.linf = std::isfinite(inner) && outer <= inner;
  return t;
}

TestFunction::TestFunction(std::string name, LineFunction f, double window)
    : name_(std::move(name)), f_(std::move(f)), tags_(measure_tags(f_, window)) {}

TestFunction TestFunction::scaled(double lambda) const {
  TestFunction out = *this;
  out.f_ = f_.scaled(lambda);
  out.name_ = name_ + "*" + std::to_string(lambda);
  return out;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Inconclusive: return "inconclusive";
  }
  return "?";
}

cplx spectral_autocorrelation(const TestFunction& f, int n) {
  require(n >= 1, "spectral route: n must be >= 1");
  if (!f.f().has_closed_form_fourier())
    throw ValidationError("spectral route needs a closed-form transform");
  if (f.is_zero()) return {};
  auto g = [&](double xi) { return std::pow(f.f().fourier(xi), n + 1) / (2.0 * kPi); };
  const double br[] = {-1.0, 0.0, 1.0};
  quad::Options opt;
  opt.abs_tol = 1e-15;
  opt.rel_tol = 1e-13;
  return quad::integrate_line(g, br, 1.0 / std::max(f.f().hints().scale, 1e-3), opt).value;
}

IdentityRecord lemma17_check(const TestFunction& f, int n, const CheckOptions& opt) {
  require(n >= 1, "lemma17_check: n must be >= 1");
  require(f.tags().l2 && f.tags().linf, "lemma17_check: f must be tagged L2 and Linf (has " +
                                            f.tags().str() + ")");
  Mode mode = opt.mode;
  if (mode == Mode::Auto) mode = n <= 3 ? Mode::Tensor : Mode::QuasiMonteCarlo;
  require(mode != Mode::Tensor || n <= 3, "lemma17_check: tensor quadrature is capped at n = 3");
  require(mode != Mode::Spectral || n <= 3, "lemma17_check: spectral route pairs with tensor, n <= 3");
  require(mode != Mode::QuasiMonteCarlo || n <= 6, "lemma17_check: Monte Carlo mode needs n <= 6");
  if (f.is_zero()) return trivial(f, "lemma17", n, -1);

  IdentityRecord r;
  r.case_name = f.name();
  r.check = "lemma17";
  r.n = n;
  if (mode == Mode::QuasiMonteCarlo) {
    const auto e = qmc_lemma(f, n, opt);
    r.lhs = e.lhs;
    r.rhs = e.rhs;
    r.stderr_ = e.stderr_diff;
    r.method = "sobol-qmc";
    if (e.stderr_diff > opt.qmc_target * std::abs(e.lhs)) {
      r.status = Status::Inconclusive;
      r.note = "standard error above target";
    }
  } else {
    bool ok = true;
    const auto orth = orthant_integrals(f, n, opt.quad_rel_tol, &ok);
    cplx full{};
    for (auto v : orth) full += v;
    r.rhs = double(n + 1) * orth[0];
    r.lhs = mode == Mode::Spectral ? spectral_autocorrelation(f, n) : full;
    r.method = mode == Mode::Spectral ? "spectral+tensor" : "tensor";
    if (!ok) {
      r.status = Status::Inconclusive;
      r.note = "nested quadrature did not converge";
    }
  }
  finish(r, f, opt.rel_tol);
  return r;
}

namespace {

IdentityRecord region_record(const TestFunction& f, int n, int j, const std::vector<cplx>& orth,
                             bool ok, const CheckOptions& opt) {
  IdentityRecord r;
  r.case_name = f.name();
  r.check = "region";
  r.n = n;
  r.j = j;
  r.method = "tensor";
  r.lhs = orth[0];
  for (std::size_t mask = 0; mask < orth.size(); ++mask)
    if (std::popcount(mask) == j) r.rhs += orth[mask];
  if (!ok) {
    r.status = Status::Inconclusive;
    r.note = "nested quadrature did not converge";
  }
  finish(r, f, opt.rel_tol);
  return r;
}

void require_region(const TestFunction& f, int n) {
  require(n >= 1 && n <= 3, "region_check: direct quadrature needs 1 <= n <= 3");
  require(f.tags().l2 && f.tags().linf, "region_check: f must be tagged L2 and Linf");
}

}  // namespace

IdentityRecord region_check(const TestFunction& f, int n, int j, const CheckOptions& opt) {
  require_region(f, n);
  require(j >= 1 && j <= n, "region_check: j must lie in 1..n");
  if (f.is_zero()) return trivial(f, "region", n, j);
  bool ok = true;
  const auto orth = orthant_integrals(f, n, opt.quad_rel_tol, &ok);
  return region_record(f, n, j, orth, ok, opt);
}

std::vector<IdentityRecord> region_checks(const TestFunction& f, int n, const CheckOptions& opt) {
  require_region(f, n);
  std::vector<IdentityRecord> out;
  if (f.is_zero()) {
    for (int j = 1; j <= n; ++j) out.push_back(trivial(f, "region", n, j));
    return out;
  }
  bool ok = true;
  const auto orth = orthant_integrals(f, n, opt.quad_rel_tol, &ok);
  for (int j = 1; j <= n; ++j) out.push_back(region_record(f, n, j, orth, ok, opt));
  return out;
}

IdentityRecord toeplitz_moment_check(const TestFunction& f, int n, const ToeplitzOptions& opt) {
  require(n >= 2 && n <= 6, "toeplitz_moment_check: n must lie in 2..6");
  require(f.tags().l1 && f.tags().l2, "toeplitz_moment_check: f must be tagged L1 and L2 (has " +
                                          f.tags().str() + ")");
  require(opt.m >= FrequencyGrid::kMinNodes, "toeplitz_moment_check: m too small");
  if (f.is_zero()) return trivial(f, "toeplitz", n, -1);
  const auto& lf = f.f();
  auto fhat = [&](double xi) { return lf.fourier(xi); };

  double xi_max = opt.xi_max;
  if (xi_max <= 0.0) {
    double peak = 0.0, last = 0.0;
    std::vector<double> mags;
    const double step = 0.25;
    for (int k = 0; k <= 8000; ++k) {
      const double a = std::max(std::abs(fhat(k * step)), std::abs(fhat(-k * step)));
      mags.push_back(a);
      peak = std::max(peak, a);
    }
    for (std::size_t k = 0; k < mags.size(); ++k)
      if (mags[k] > 1e-13 * peak) last = double(k) * step;
    xi_max = std::max(8.0, 1.25 * last);
  }
  const FrequencyGrid grid(xi_max, opt.m);
  const double tail = symbol_tail_ratio(fhat, grid);
  if (tail > opt.tail_tol) {
    std::ostringstream os;
    os << "toeplitz_moment_check: symbol tail " << tail << " exceeds " << opt.tail_tol
       << " at xi_max " << xi_max;
    throw NumericalFailure(os.str());
  }
  auto v = HardyFunction::from_fourier(grid, fhat);
  if (n > 2) {
    const auto M = toeplitz_matrix(fhat, grid, opt.order);
    for (int k = 0; k < n - 2; ++k) {
      v = HardyFunction(grid, M * v.values());
      if (v.tail_ratio() > opt.tail_tol) {
        std::ostringstream os;
        os << "toeplitz_moment_check: product tail " << v.tail_ratio() << " after " << k + 1
           << " applications; increase xi_max";
        throw NumericalFailure(os.str());
      }
    }
  }
  IdentityRecord r;
  r.case_name = f.name();
  r.check = "toeplitz";
  r.n = n;
  r.method = "grid-toeplitz";
  const auto& w = grid.weights();
  cplx acc{};
  for (int j = 0; j < grid.m(); ++j) acc += w[j] * fhat(-grid.node(j)) * v[j];
  r.lhs = acc / (2.0 * kPi);
  auto fn = [&](double y) { return std::pow(lf(y), n); };
  quad::Options qo;
  qo.abs_tol = 1e-15;
  qo.rel_tol = 1e-13;
  r.rhs = quad::integrate_line(fn, lf.breakpoints(), std::max(1.0, lf.hints().scale), qo).value /
          double(n);
  finish(r, f, opt.rel_tol);
  return r;
}

std::vector<TestFunction> standard_functions() {
  const double sp = std::sqrt(kPi);
  std::vector<TestFunction> out;
  out.emplace_back("gauss",
                   LineFunction([](double y) { return cplx(std::exp(-y * y), 0.0); },
                                [sp](double xi) { return cplx(sp * std::exp(-0.25 * xi * xi), 0.0); },
                                ShapeHints{{0.0}, 1.0, 7.0, 1.0}, true));
  out.emplace_back("skew_gauss",
                   LineFunction([](double y) { return cplx(std::exp(-y * y) * (1.0 + y), 0.0); },
                                [sp](double xi) {
                                  return sp * std::exp(-0.25 * xi * xi) * cplx(1.0, -0.5 * xi);
                                },
                                ShapeHints{{0.0, -1.0}, 1.0, 7.0, 1.0}, true));
  out.emplace_back("lorentz2",
                   LineFunction([](double y) { return cplx(2.0 / (1.0 + y * y), 0.0); },
                                [](double xi) { return cplx(2.0 * kPi * std::exp(-std::abs(xi)), 0.0); },
                                ShapeHints{{0.0}, 1.0, 10.0, 1.0}, true));
  out.emplace_back("sech",
                   LineFunction([](double y) { return cplx(1.0 / std::cosh(y), 0.0); },
                                [](double xi) { return cplx(kPi / std::cosh(0.5 * kPi * xi), 0.0); },
                                ShapeHints{{0.0}, 1.0, 40.0, 1.0}, true));
  return out;
}

TestFunction complex_extension_function() {
  const double sp = std::sqrt(kPi);
  return TestFunction(
      "gauss_phase",
      LineFunction([](double y) { return std::exp(cplx(-y * y, y)); },
                   [sp](double xi) { return cplx(sp * std::exp(-0.25 * (xi - 1.0) * (xi - 1.0)), 0.0); },
                   ShapeHints{{0.0}, 1.0, 7.0, 1.0}, false));
}

std::vector<IdentityRecord> run_suite(const SuiteOptions& opt) {
  const auto fs = standard_functions();
  using Job = std::function<std::vector<IdentityRecord>()>;
  std::vector<Job> jobs;
  std::vector<IdentityRecord> labels;
  auto add = [&](const std::string& name, const char* check, int n, Job job) {
    IdentityRecord r;
    r.case_name = name;
    r.check = check;
    r.n = n;
    labels.push_back(r);
    jobs.push_back(std::move(job));
  };
  auto one = [](IdentityRecord r) { return std::vector<IdentityRecord>{std::move(r)}; };
  for (const auto& f : fs)
    for (int n : opt.lemma_n)
      add(f.name(), "lemma17", n, [&, f, n] { return one(lemma17_check(f, n, opt.check)); });
  for (const auto& f : fs)
    for (int n : opt.region_n)
      add(f.name(), "region", n, [&, f, n] { return region_checks(f, n, opt.check); });
  for (const auto& f : fs) {
    if (f.name() == "skew_gauss") continue;
    for (int n : opt.toeplitz_n)
      add(f.name(), "toeplitz", n,
          [&, f, n] { return one(toeplitz_moment_check(f, n, opt.toeplitz)); });
  }
  for (int n : opt.qmc_n)
    add(fs[0].name(), "lemma17", n, [&, n] {
      auto c = opt.check;
      c.mode = Mode::QuasiMonteCarlo;
      return one(lemma17_check(fs[0], n, c));
    });
  if (opt.include_complex) {
    const auto g = complex_extension_function();
    for (int n : opt.lemma_n)
      add(g.name(), "lemma17", n, [&, g, n] { return one(lemma17_check(g, n, opt.check)); });
  }

  std::vector<std::vector<IdentityRecord>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      try {
        results[k] = jobs[k]();
      } catch (const Error& e) {
        auto r = labels[k];
        r.method = "error";
        r.status = Status::Inconclusive;
        r.note = e.what();
        results[k] = {r};
      }
    }
  };
  const int nt = std::max(1, opt.threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<IdentityRecord> out;
  for (auto& v : results)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

std::string report_json(const std::vector<IdentityRecord>& records) {
  using nlohmann::ordered_json;
  auto num = [](cplx v) -> ordered_json {
    if (v.imag() == 0.0) return v.real();
    return ordered_json{{"re", v.real()}, {"im", v.imag()}};
  };
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json o;
    o["case"] = r.case_name;
    o["check"] = r.check;
    o["n"] = r.n;
    o["j"] = r.j < 0 ? ordered_json(nullptr) : ordered_json(r.j);
    o["lhs"] = num(r.lhs);
    o["rhs"] = num(r.rhs);
    o["rel_err"] = r.rel_err;
    o["method"] = r.method;
    o["stderr"] = r.stderr_;
    o["status"] = to_string(r.status);
    o["note"] = r.note;
    arr.push_back(std::move(o));
  }
  return arr.dump(2);
}

}  // namespace bozd::identity
