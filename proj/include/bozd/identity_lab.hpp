#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bozd/line_function.hpp"

namespace bozd::identity {

struct ClassTags {
  bool l1 = false;
  bool l2 = false;
  bool linf = false;
  std::string str() const;
};

/// Integrability tags measured on [-window, window] against [-2 window, 2 window]:
/// a p-norm counts as finite when doubling the window adds less than
/// 1e-3 of it, boundedness when the outer shell never exceeds the inner sup.
ClassTags measure_tags(const LineFunction& f, double window = 1000.0);

/// A (possibly complex) function with measured class tags.
class TestFunction {
 public:
  TestFunction(std::string name, LineFunction f, double window = 1000.0);

  const std::string& name() const noexcept { return name_; }
  const LineFunction& f() const noexcept { return f_; }
  const ClassTags& tags() const noexcept { return tags_; }
  cplx operator()(double y) const { return f_(y); }
  bool is_real() const noexcept { return f_.is_real(); }
  bool is_zero() const noexcept { return f_.is_zero(); }

  TestFunction scaled(double lambda) const;

 private:
  std::string name_;
  LineFunction f_;
  ClassTags tags_;
};

enum class Mode { Auto, Tensor, QuasiMonteCarlo, Spectral };

struct CheckOptions {
  Mode mode = Mode::Auto;
  double rel_tol = 1e-6;
  /// Quadrature target for the nested tensor rule.
  double quad_rel_tol = 1e-11;
  std::uint64_t seed = 20240521;
  /// Sobol points per randomized replicate (rounded to a power of two).
  int qmc_points = 1 << 15;
  int qmc_replicates = 16;
  /// Relative standard error above which a QMC run is inconclusive.
  double qmc_target = 1e-3;
};

enum class Status { Pass, Fail, Inconclusive };
std::string to_string(Status s);

struct IdentityRecord {
  std::string case_name;
  std::string check;
  int n = 0;
  /// Number of negative coordinates for region checks, -1 otherwise.
  int j = -1;
  cplx lhs{};
  cplx rhs{};
  double rel_err = 0.0;
  std::string method;
  /// Standard error of lhs - rhs for QMC runs, 0 for deterministic ones.
  double stderr_ = 0.0;
  Status status = Status::Pass;
  std::string note;
};

/// Full-space integral of f(y1) f(y2 - y1) ... f(-yn) against n + 1 times
/// its positive-orthant part.
IdentityRecord lemma17_check(const TestFunction& f, int n, const CheckOptions& opt = {});

/// Positive-orthant integral against the integral over the region with
/// exactly j negative coordinates.
IdentityRecord region_check(const TestFunction& f, int n, int j, const CheckOptions& opt = {});
/// region_check for j = 1..n sharing one set of orthant integrals.
std::vector<IdentityRecord> region_checks(const TestFunction& f, int n, const CheckOptions& opt = {});

/// (1/2 pi) int f^(xi)^(n+1) d xi, the (n+1)-fold autocorrelation at 0.
/// Needs a closed-form transform.
cplx spectral_autocorrelation(const TestFunction& f, int n);

struct ToeplitzOptions {
  /// 0 picks xi_max from the decay of f^.
  double xi_max = 0.0;
  int m = 1024;
  int order = 6;
  double rel_tol = 1e-7;
  double tail_tol = 1e-6;
};

/// int f T_f^(n-2) Pi f dy with grid operators against (1/n) int f^n dy.
IdentityRecord toeplitz_moment_check(const TestFunction& f, int n, const ToeplitzOptions& opt = {});

/// The four real functions of the standard suite plus a complex one.
std::vector<TestFunction> standard_functions();
TestFunction complex_extension_function();

struct SuiteOptions {
  std::vector<int> lemma_n{1, 2, 3};
  std::vector<int> region_n{2, 3};
  std::vector<int> toeplitz_n{2, 3, 4};
  std::vector<int> qmc_n{4};
  bool include_complex = true;
  int threads = 1;
  CheckOptions check{};
  ToeplitzOptions toeplitz{};
};

/// Runs every case; records come back in a fixed order regardless of threads.
std::vector<IdentityRecord> run_suite(const SuiteOptions& opt = {});

/// [{case, check, n, j, lhs, rhs, rel_err, method, stderr, status, note}, ...]
std::string report_json(const std::vector<IdentityRecord>& records);

}  // namespace bozd::identity
