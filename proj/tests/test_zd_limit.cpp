#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "bozd/families.hpp"
#include "bozd/operator_resolvent.hpp"
#include "bozd/zd_limit.hpp"

using namespace bozd;

namespace {

template <class F>
double bisect(F f, double a, double b) {
  double fa = f(a);
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (a + b), fc = f(c);
    if ((fc < 0) == (fa < 0)) a = c, fa = fc;
    else b = c;
  }
  return 0.5 * (a + b);
}

// Independent root list of y + 2t u0(y) = x by dense sign scan and bisection.
template <class F>
std::vector<double> scan_roots(F g, double lo, double hi, double step) {
  std::vector<double> r;
  double a = lo, ga = g(a);
  for (double b = lo + step; b <= hi; b += step) {
    const double gb = g(b);
    if ((ga < 0) != (gb < 0)) r.push_back(bisect(g, a, b));
    a = b, ga = gb;
  }
  return r;
}

}  // namespace

TEST_CASE("log integral degenerate cases") {
  const auto u0 = families::gaussian(1.0, 1.0);
  CHECK_THROWS_AS(zd_log_integral(u0, 0.0, UpperHalfPoint(0.0, 1.0)), ValidationError);
  CHECK_THROWS_AS(zd_log_integral(u0, INFINITY, UpperHalfPoint(0.0, 1.0)), ValidationError);
  CHECK(zd_log_integral(families::zero(), 0.4, UpperHalfPoint(0.0, 1.0)).value == cplx(0.0));
  // t -> 0+ recovers the Cauchy form of Pi u0.
  const UpperHalfPoint z(0.3, 0.8);
  const cplx small_t = zd_log_integral(u0, 1e-7, z).value;
  CHECK(std::abs(small_t - cauchy_extension(u0, z)) < 1e-6);
  // The double-integral form agrees with the log form.
  LogIntegralOptions dbl;
  dbl.mode = LogIntegralMode::DoubleIntegral;
  const cplx a = zd_log_integral(u0, 0.7, z).value;
  const cplx b = zd_log_integral(u0, 0.7, z, dbl).value;
  CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
}

TEST_CASE("log integral against the operator formula") {
  const auto u0 = families::gaussian(1.0, 1.0);
  const UpperHalfPoint z(0.5, 1.0);
  const cplx a = zd_log_integral(u0, 0.8, z).value;
  const cplx b = zd_operator(u0, 0.8, z).value;
  CHECK(std::abs(a - b) <= 1e-6 * std::abs(a));
}

TEST_CASE("linear growth refusal in the log integral") {
  const auto u0 = families::spike_train(1.0, 8.0, 1.0, 3);
  const double C = u0.growth_constant(1000.0);
  CHECK_THROWS_AS(zd_log_integral(u0, 0.6 / C, UpperHalfPoint(0.0, 1.0)), RegimeRefusal);
}

TEST_CASE("critical set of a Gaussian") {
  const auto u0 = families::gaussian(1.0, 1.0);
  // max(-u0') = sqrt(2) e^{-1/2} at y = 1/sqrt(2)
  const double tstar = 0.5 / (std::sqrt(2.0) * std::exp(-0.5));
  CHECK(first_critical_time(u0) == doctest::Approx(tstar).epsilon(1e-12));
  CHECK(first_critical_time(u0) == doctest::Approx(0.582910995).epsilon(1e-9));
  CHECK(std::isinf(first_critical_time(families::zero())));

  CHECK(critical_values(u0, 0.0).values.empty());
  CHECK(critical_values(u0, 0.5).values.empty());

  const double t = 2.0;
  auto phi = [&](double y) { return 1.0 - 4.0 * t * y * std::exp(-y * y); };
  const double y1 = bisect(phi, 0.0, 0.5), y2 = bisect(phi, 1.0, 3.0);
  const auto K = critical_values(u0, t);
  REQUIRE(K.fold_points.size() == 2);
  CHECK(K.fold_points[0] == doctest::Approx(y1).epsilon(1e-10));
  CHECK(K.fold_points[1] == doctest::Approx(y2).epsilon(1e-10));
  CHECK(y1 == doctest::Approx(0.1270).epsilon(1e-3));
  CHECK(y2 == doctest::Approx(1.5959).epsilon(1e-3));
  REQUIRE(K.values.size() == 2);
  CHECK(K.values[0] == doctest::Approx(1.9092).epsilon(1e-3));
  CHECK(K.values[1] == doctest::Approx(4.0630).epsilon(1e-3));
  CHECK(K.crit_tol == doctest::Approx(3e-3));
  CHECK(K.contains(K.values[0] + 1e-3));
  CHECK_FALSE(K.contains(0.0));

  const auto j = nlohmann::json::parse(critical_set_json(K));
  CHECK(j["critical_values"].size() == 2);
  CHECK(j["intervals"].size() == 2);
}

TEST_CASE("branch roots against a dense scan") {
  const auto u0 = families::gaussian(1.0, 1.0);
  const double t = 2.0;
  for (double x : {0.5, 3.0, -2.0, 6.0}) {
    auto g = [&](double y) { return y + 2.0 * t * u0(y) - x; };
    const auto ref = scan_roots(g, -20.0, 20.0, 1e-4);
    const auto bs = branch_roots(u0, t, x);
    REQUIRE(bs.roots.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(bs.roots[k] == doctest::Approx(ref[k]).epsilon(1e-10));
      CHECK(std::abs(g(bs.roots[k])) <= 1e-12);
    }
    CHECK(bs.roots.size() % 2 == 1);
    CHECK(bs.ell == int(bs.roots.size() / 2));
  }
  CHECK(branch_roots(u0, t, 3.0).ell == 1);
  // t = 0 and zero data.
  CHECK(branch_roots(u0, 0.0, 1.7).roots == std::vector<double>{1.7});
  CHECK(branch_zd(families::zero(), 1.0, 0.3) == 0.0);
  // Near a critical value.
  const auto K = critical_values(u0, t);
  CHECK_THROWS_AS(branch_roots(u0, t, K.values[0]), NumericalFailure);
  // Non-C1 class.
  CHECK_THROWS_AS(branch_roots(families::spike_train(1.0, 1.0, 0.5, 3), 0.5, 0.0), RegimeRefusal);
}

TEST_CASE("Burgers regime: single branch solves the characteristic equation") {
  const auto u0 = families::gaussian(1.0, 1.0);
  const double t = 0.5;
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    const auto bs = branch_roots(u0, t, x);
    CHECK(bs.ell == 0);
    const double v = branch_zd(u0, t, x);
    CHECK(std::abs(v - u0(x - 2.0 * t * v)) <= 1e-12);
  }
}

TEST_CASE("alternating sum is continuous across a fold") {
  const auto u0 = families::gaussian(1.0, 1.0);
  const double t = 2.0;
  const double c = critical_values(u0, t).values[1];
  double prev = INFINITY;
  for (double d : {1e-1, 3e-2, 1e-2}) {
    const double jump = std::abs(branch_zd(u0, t, c + d) - branch_zd(u0, t, c - d));
    CHECK(jump <= 10.0 * std::sqrt(d));
    CHECK(jump < prev);
    prev = jump;
  }
}

TEST_CASE("boundary reconstruction on the real line") {
  const auto u0 = families::gaussian(1.0, 1.0);
  const auto zero = zd_real_line(families::zero(), 1.0, 0.2);
  CHECK(zero.value == 0.0);
  // Outside the critical set at t = 2 the boundary value matches the branch formula.
  for (double x : {-1.0, 0.5, 5.0}) {
    const auto r = zd_real_line(u0, 2.0, x);
    CHECK(std::abs(r.value - branch_zd(u0, 2.0, x)) <= 1e-3);
    CHECK(r.samples.size() == r.deltas.size());
  }
  // Small t approaches u0.
  const auto s = zd_real_line(u0, 1e-3, 0.4);
  CHECK(std::abs(s.value - u0(0.4)) <= 5e-3);
  CHECK(std::abs(s.value - branch_zd(u0, 1e-3, 0.4)) <= 1e-3);
  // Odd data gives an odd profile.
  const auto odd = families::rational({{1.0, 1.0, 1.0}, {-1.0, -1.0, 1.0}});
  const double p = zd_real_line(odd, 0.5, 0.7).value;
  const double q = zd_real_line(odd, 0.5, -0.7).value;
  CHECK(std::abs(p + q) <= 1e-6);
  CHECK_THROWS_AS(zd_real_line(u0, 1.0, 0.0, {}), ValidationError);
  CHECK_THROWS_AS(zd_real_line(u0, 1.0, 0.0, {0.01, 0.1}), ValidationError);
  CHECK_THROWS_AS(zd_real_line(u0, 1.0, 0.0, default_delta_schedule(), -1), ValidationError);
}

TEST_CASE("profile csv") {
  std::ostringstream os;
  write_profile_csv(os, {{0.5, 0.1, 0.1, 1, "ok"}, {2.0, NAN, 0.2, 0, "critical"}});
  const auto s = os.str();
  CHECK(s.find("x,") != std::string::npos);
  CHECK(s.find("critical") != std::string::npos);
}
