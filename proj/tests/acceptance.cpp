// Acceptance run: one PASS/FAIL line per criterion, summary JSON in --out.
#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bozd/bo_solver.hpp"
#include "bozd/experiment.hpp"
#include "bozd/families.hpp"
#include "bozd/identity_lab.hpp"
#include "bozd/operator_resolvent.hpp"
#include "bozd/zd_limit.hpp"

using namespace bozd;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

// Largest residual over every accepted solve in this run.
double g_max_residual = 0.0;
void note_residual(double r) { g_max_residual = std::max(g_max_residual, r); }

const std::vector<double> kTimes{0.1, 0.3, 1.0};
const std::vector<cplx> kZ{{0, 1}, {0, 2}, {1, 1}, {-1, 0.5}};

// zd_operator against zd_log_integral over the criterion-1 grid.
Outcome formula_grid(const std::vector<std::pair<std::string, RealLineFunction>>& data,
                     const std::function<FormulaNumerics(const RealLineFunction&)>& numerics) {
  double worst = 0.0;
  std::string where;
  int count = 0;
  for (const auto& [name, u0] : data) {
    const FormulaContext ctx(u0, numerics(u0));
    for (double t : kTimes)
      for (cplx z : kZ) {
        const UpperHalfPoint zp(z);
        const auto op = zd_operator(ctx, t, zp);
        note_residual(op.residual);
        const cplx lg = zd_log_integral(u0, t, zp).value;
        const double err = std::abs(op.value - lg) / (1.0 + std::abs(lg));
        if (err > worst) {
          worst = err;
          std::ostringstream os;
          os << name << " t=" << t << " z=" << z.real() << "+" << z.imag() << "i";
          where = os.str();
        }
        ++count;
      }
  }
  return {worst <= 1e-6, std::to_string(count) + " cases, worst scaled error " + sci(worst) +
                             " at " + where + " (limit 1e-6)"};
}

Outcome criterion1() {
  return formula_grid({{"gaussian(1,1)", families::gaussian(1.0, 1.0)},
                       {"lorentzian(2)", families::lorentzian(2.0)},
                       {"sech2(1,1)", families::sech2(1.0, 1.0)}},
                      [](const RealLineFunction&) { return FormulaNumerics{}; });
}

Outcome criterion2() {
  struct Case {
    const char* name;
    RealLineFunction u0;
    double t;
    cplx z;
  };
  const std::vector<Case> cases{
      {"gaussian", families::gaussian(1.0, 1.0), 0.05, {0, 3}},
      {"gaussian", families::gaussian(1.0, 1.0), 0.1, {0, 2}},
      {"gaussian", families::gaussian(1.0, 1.0), 0.2, {1, 2}},
      {"gaussian", families::gaussian(1.0, 1.0), -0.1, {-1, 1.5}},
      {"lorentzian", families::lorentzian(1.0), 0.05, {0, 1}},
      {"lorentzian", families::lorentzian(1.0), 0.1, {0.5, 2}},
      {"lorentzian", families::lorentzian(2.0), 0.05, {0, 3}},
      {"sech2", families::sech2(1.0, 1.0), 0.1, {0, 2}},
      {"sech2", families::sech2(1.0, 1.0), 0.15, {2, 1.5}},
      {"sech2", families::sech2(0.5, 2.0), 0.3, {0, 2.5}},
  };
  double worst_sum = 0.0, worst_term = 0.0, worst_gate = 0.0;
  for (const auto& c : cases) {
    const FormulaContext ctx(c.u0);
    const UpperHalfPoint zp(c.z);
    const auto nz = neumann_zd(ctx, c.t, zp, 40);
    worst_gate = std::max(worst_gate, nz.contraction);
    const auto op = zd_operator(ctx, c.t, zp);
    note_residual(op.residual);
    worst_sum = std::max(worst_sum, std::abs(nz.value - op.value));
    for (int n = 2; n <= 4; ++n)
      worst_term = std::max(worst_term, term_reduction_check(ctx, c.t, zp, n).rel_err);
  }
  const bool pass = worst_gate < 0.5 && worst_sum <= 1e-8 && worst_term <= 1e-8;
  return {pass, "10 cases, max 2|t|sup|f_z| = " + sci(worst_gate) + ", |neumann - operator| " +
                    sci(worst_sum) + ", term reduction rel_err " + sci(worst_term) +
                    " (limits 1/2, 1e-8, 1e-8)"};
}

Outcome criterion3() {
  const auto u0 = families::gaussian(1.0, 1.0);
  const double t = 2.0;
  const auto K = critical_values(u0, t);
  std::vector<double> xs;
  for (double x = -3.0; xs.size() < 50; x += 0.2)
    if (!K.contains(x)) xs.push_back(x);
  int good = 0;
  double worst = 0.0;
  for (double x : xs) {
    const double b = branch_zd(u0, t, x);
    const double r = zd_real_line(u0, t, x).value;
    const double err = std::abs(b - r);
    worst = std::max(worst, err);
    if (err <= 1e-3) ++good;
  }
  const double frac = good / double(xs.size());
  return {frac >= 0.95, std::to_string(good) + "/" + std::to_string(xs.size()) +
                            " samples within 1e-3 (need 95%), worst " + sci(worst)};
}

Outcome criterion4() {
  const auto u0 = families::gaussian(1.0, 1.0);
  const double t = 0.5;
  double worst = 0.0;
  int branches = 0, n = 0;
  for (double x = -4.0; x <= 4.0 + 1e-12; x += 0.05, ++n) {
    // Characteristics: y + 2t u0(y) = x is monotone before the first fold.
    double a = -20.0, b = 20.0;
    for (int it = 0; it < 200; ++it) {
      const double c = 0.5 * (a + b);
      if (c + 2.0 * t * u0(c) < x) a = c;
      else b = c;
    }
    const double moc = u0(0.5 * (a + b));
    const auto bs = branch_roots(u0, t, x);
    branches = std::max(branches, bs.ell);
    worst = std::max(worst, std::abs(branch_zd(u0, t, x) - moc));
  }
  return {worst <= 1e-10 && branches == 0,
          std::to_string(n) + " x samples at t = 0.5 < t* = " + sci(first_critical_time(u0)) +
              ", max ell " + std::to_string(branches) + ", worst |branch - characteristics| " +
              sci(worst) + " (limit 1e-10)"};
}

Outcome criterion5(const fs::path& out) {
  const std::string text = R"({
  "command": "eps-sweep",
  "initial_data": {"family": "gaussian", "a": 1, "sigma": 1},
  "t": [2.0],
  "eps": [0.4, 0.2, 0.1, 0.05],
  "numerics": {"n_modes": 4096, "L": 20, "dt": 0.001}
})";
  auto loaded = cli::parse_config(text);
  if (!loaded.ok()) return {false, "config rejected"};
  auto cfg = *loaded.config;
  cfg.output_dir = (out / "eps_sweep").string();
  const auto res = cli::run(cfg);
  if (res.exit_code != 0) return {false, "eps-sweep exited with " + std::to_string(res.exit_code) + ": " + res.message};
  std::ifstream in(fs::path(cfg.output_dir) / "eps_sweep_summary.json");
  const auto s = nlohmann::json::parse(in);
  std::ostringstream os;
  for (const auto& p : s["test_functions"]) {
    os << "phi" << p["phi_index"].get<int>() << " errors";
    for (double e : p["errors"]) os << " " << sci(e);
    os << " ratio " << sci(p["last_over_first"].get<double>()) << "; ";
  }
  return {s["weak_convergence_pass"].get<bool>(), os.str() + "need strictly decreasing, ratio <= 0.25"};
}

// Pi of a periodic-box state at z: the box transform on the grid xi_k = k pi / L.
cplx project_state(const SolverState& s, const UpperHalfPoint& z) {
  const int n = s.box.n_modes;
  std::vector<double> u = s.u;
  std::vector<std::complex<double>> spec(n / 2 + 1);
  auto* plan = fftw_plan_dft_r2c_1d(n, u.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                    FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  const FrequencyGrid grid(kPi * (n / 2) / s.box.half_width, n / 2 + 1);
  Eigen::VectorXcd v(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) v[k] = s.box.dx() * ((k % 2 == 0) ? 1.0 : -1.0) * spec[k];
  return eval_upper_half(HardyFunction(grid, std::move(v)), z);
}

Outcome criterion6() {
  const auto u0 = families::gaussian(1.0, 1.0);
  const UpperHalfPoint z(0.0, 2.0);
  const FormulaContext ctx(u0);
  StepperConfig cfg;
  cfg.dt = 1e-3;
  double worst = 0.0;
  std::ostringstream os;
  for (double t : {0.05, 0.1}) {
    const auto rep = solve_to(u0, t, 1.0, Box{40.0, 4096}, cfg);
    const cplx pde = project_state(rep.state, z);
    const auto f = pi_u_explicit(ctx, t, z);
    note_residual(f.residual);
    const double d = std::abs(pde - f.value);
    worst = std::max(worst, d);
    os << "t=" << t << " |diff| " << sci(d) << "; ";
  }
  return {worst <= 1e-3, os.str() + "limit 1e-3"};
}

Outcome criterion7() {
  using namespace identity;
  SuiteOptions opt;
  opt.qmc_n = {};
  opt.include_complex = false;
  const auto recs = run_suite(opt);
  int lemma = 0, region = 0, toep = 0, failed = 0;
  double wl = 0.0, wt = 0.0;
  std::string first_fail;
  for (const auto& r : recs) {
    const bool ok = r.status == Status::Pass;
    if (r.check == "lemma17") {
      ++lemma;
      wl = std::max(wl, r.rel_err);
    } else if (r.check == "region") {
      ++region;
    } else if (r.check == "toeplitz") {
      ++toep;
      wt = std::max(wt, r.rel_err);
    }
    if (!ok) {
      ++failed;
      if (first_fail.empty()) first_fail = r.case_name + "/" + r.check + " n=" + std::to_string(r.n);
    }
  }
  // 3 n x 4 functions; regions j = 1..n for n = 2, 3 over 4 functions; 3 n x 3 functions.
  const bool counts = lemma == 12 && region == 20 && toep == 9;
  std::ostringstream os;
  os << lemma << " lemma (worst " << sci(wl) << "), " << region << " region, " << toep
     << " toeplitz (worst " << sci(wt) << ") checks, " << failed << " failed";
  if (!first_fail.empty()) os << ", first " << first_fail;
  return {counts && failed == 0, os.str()};
}

HardyFunction random_dom_g(const FrequencyGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ua(0.6, 3.0), uc(-1.0, 1.0);
  std::uniform_int_distribution<int> up(0, 3);
  struct Term {
    cplx c;
    int p;
    double a;
  };
  std::vector<Term> terms;
  for (int k = 0; k < 3; ++k) terms.push_back({cplx(uc(rng), uc(rng)), up(rng), ua(rng)});
  return HardyFunction::from_fourier(g, [terms](double xi) {
    cplx s{};
    for (const auto& t : terms) s += t.c * std::pow(xi, t.p) * std::exp(-t.a * xi);
    return s;
  });
}

Outcome criterion8() {
  std::ostringstream os;
  bool pass = true;

  // Dissipativity and resolvent bound on a seeded randomized suite.
  const FrequencyGrid g(40.0, 2048);
  std::mt19937_64 rng(20240521);
  double fitted = 0.0, res_bound = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto f = random_dom_g(g, rng);
    const double r = std::abs(inner(apply_G(f, 6), f).imag() + std::norm(f[0]) / (4.0 * kPi));
    fitted = std::max(fitted, r / (g.h() * (f.norm_sq() + apply_D(f).norm_sq())));
    for (double lam : {0.5, 1.0, 2.0}) {
      const auto w = resolvent_G(UpperHalfPoint(0.0, lam), f);
      res_bound = std::max(res_bound, w.norm() * lam / f.norm());
    }
  }
  pass = pass && fitted <= 1.0 && res_bound <= 1.0 + 1e-10;
  os << "dissipativity C " << sci(fitted) << " (<= 1), lambda||R f||/||f|| " << sci(res_bound)
     << "; ";

  // Trace bound at xi_max = 20, m = 1024, delta = 1e-2 on |x| <= 20.
  FormulaNumerics tn;
  tn.xi_max = 20.0;
  tn.m = 1024;
  std::vector<double> xs;
  for (int k = 0; k <= 200; ++k) xs.push_back(-20.0 + 0.2 * k);
  double trace_ratio = 0.0, trace_res = 0.0;
  for (const auto& u0 : {families::gaussian(1.0, 1.0), families::sech2(1.0, 1.0)}) {
    const FormulaContext ctx(u0, tn);
    for (double eps : {0.0, 1.0})
      for (double t : {0.1, 0.5}) {
        const auto bt = boundary_trace(ctx, t, eps, 1e-2, xs);
        trace_ratio = std::max(trace_ratio, bt.trace_norm / bt.reference_norm);
        trace_res = std::max(trace_res, bt.max_residual);
      }
  }
  note_residual(trace_res);
  pass = pass && trace_ratio <= 1.0 + 1e-2;
  os << "trace/||Pi u0|| " << sci(trace_ratio) << " (<= 1.01); ";

  // Conservation at the reference resolution.
  StepperConfig cfg;
  cfg.dt = 1e-3;
  double drift = 0.0;
  for (double eps : {0.2, 1.0}) {
    const auto rep = solve_to(families::gaussian(1.0, 1.0), 1.0, eps, Box{40.0, 4096}, cfg);
    drift = std::max(drift, rep.drift_per_unit_time);
  }
  pass = pass && drift <= 1e-8;
  os << "L2 drift/unit time " << sci(drift) << " (<= 1e-8); ";

  // ETDRK4 order between dt, dt/2, dt/4.
  std::vector<SolverState> sol;
  for (double dt : {0.02, 0.01, 0.005}) {
    StepperConfig c;
    c.dt = dt;
    sol.push_back(solve_to(families::gaussian(1.0, 1.0), 0.5, 1.0, Box{40.0, 1024}, c).state);
  }
  auto diff = [](const SolverState& a, const SolverState& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.u.size(); ++j) d = std::max(d, std::abs(a.u[j] - b.u[j]));
    return d;
  };
  const double order = std::log2(diff(sol[0], sol[1]) / diff(sol[1], sol[2]));
  pass = pass && order >= 3.5;
  os << "ETDRK4 order " << std::setprecision(3) << order << " (>= 3.5); ";

  pass = pass && g_max_residual <= 1e-10;
  os << "max resolvent residual " << sci(g_max_residual) << " (<= 1e-10)";
  return {pass, os.str()};
}

Outcome criterion9() {
  std::ostringstream os;
  auto fine = [](const RealLineFunction& u0) {
    FormulaNumerics n;
    n.xi_max = suggest_xi_max(u0);
    n.m = 4096;
    return n;
  };
  const auto spikes = families::spike_train(1.0, 8.0, 0.5, 3);
  const auto sub = formula_grid({{"spike_train(sublinear)", spikes}}, fine);
  os << "sublinear: " << sub.detail << "; ";

  // Linear class on the same (t, z) grid: agreement where 2|t|C < 1, refusal elsewhere.
  const auto lin = families::spike_train(1.0, 8.0, 1.0, 2);
  const FormulaContext ctx(lin, fine(lin));
  const double C = ctx.growth_constant();
  double worst = 0.0;
  int agreed = 0, refused = 0, expected_refusals = 0, wrong = 0;
  for (double t : kTimes) {
    const bool inside = 2.0 * t * C < 1.0;
    if (!inside) ++expected_refusals;
    for (cplx z : kZ) {
      const UpperHalfPoint zp(z);
      if (inside) {
        const auto op = zd_operator(ctx, t, zp);
        note_residual(op.residual);
        const cplx lg = zd_log_integral(lin, t, zp).value;
        const double err = std::abs(op.value - lg) / (1.0 + std::abs(lg));
        worst = std::max(worst, err);
        if (err <= 1e-6) ++agreed;
        continue;
      }
      bool op_refused = false, log_refused = false;
      try {
        (void)zd_operator(ctx, t, zp);
      } catch (const RegimeRefusal&) {
        op_refused = true;
      }
      try {
        (void)zd_log_integral(lin, t, zp);
      } catch (const RegimeRefusal&) {
        log_refused = true;
      }
      if (op_refused && log_refused) ++refused;
      else ++wrong;
    }
  }
  const int inside_cases = int(kTimes.size() - expected_refusals) * int(kZ.size());
  os << "linear (C = " << sci(C) << "): " << agreed << "/" << inside_cases
     << " agree inside 2|t|C < 1 (worst " << sci(worst) << "), " << refused << "/"
     << expected_refusals * int(kZ.size()) << " refused outside";
  const bool pass = sub.pass && agreed == inside_cases && inside_cases > 0 &&
                    refused == expected_refusals * int(kZ.size()) && expected_refusals > 0 &&
                    wrong == 0;
  return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "directory for artifacts and the summary");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<Criterion> all{
      {1, "formula-vs-formula", 120, criterion1},
      {2, "neumann-consistency", 60, criterion2},
      {3, "branch-vs-boundary", 300, criterion3},
      {4, "burgers-limit", 60, criterion4},
      {5, "eps-sweep-weak-convergence", 1800, [&] { return criterion5(out); }},
      {6, "explicit-formula-vs-pde", 300, criterion6},
      {7, "identity-suites", 600, criterion7},
      {8, "structural-invariants", 600, criterion8},
      {9, "generality-gate", 600, criterion9},
  };

  ojson summary = ojson::array();
  int failures = 0;
  const std::set<int> chosen(only.begin(), only.end());
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::ostringstream tm;
    tm << std::fixed << std::setprecision(1) << secs << " s of " << c.budget_seconds << " s";
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": "
              << o.detail << " [" << tm.str() << (in_time ? "" : ", over budget") << "]"
              << std::endl;
    summary.push_back({{"criterion", c.id},
                       {"name", c.name},
                       {"pass", pass},
                       {"seconds", secs},
                       {"budget_seconds", c.budget_seconds},
                       {"detail", o.detail}});
  }
  std::ofstream(fs::path(out) / "acceptance.json") << summary.dump(2) << '\n';
  return failures == 0 ? 0 : 1;
}
