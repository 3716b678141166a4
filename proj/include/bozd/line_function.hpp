#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bozd/common.hpp"

namespace bozd {

/// Where the interesting structure of a function sits; drives quadrature
/// breakpoints and scan ranges.
struct ShapeHints {
  /// Centers of narrow features (bumps, poles' real parts).
  std::vector<double> features;
  /// Typical length scale, used to scale tail compactification.
  double scale = 1.0;
  /// |x| beyond which the function is in its decaying tail.
  double extent = 10.0;
  /// Width of the narrowest feature.
  double min_width = 1.0;
};

/// Complex-valued function on the line together with its Fourier transform
///   f^(xi) = int f(x) e^{-i x xi} dx.
/// At xi = 0 the transform returns its limit from the right, which is the
/// value the Hardy projection keeps. When no closed-form transform is
/// supplied it is computed by adaptive quadrature.
class LineFunction {
 public:
  using Eval = std::function<cplx(double)>;

  /// The zero function.
  LineFunction();
  LineFunction(Eval value, Eval fourier, ShapeHints hints, bool real);

  cplx operator()(double x) const { return impl_->value(x); }
  cplx fourier(double xi) const;

  bool is_zero() const noexcept { return impl_->zero; }
  bool is_real() const noexcept { return impl_->real; }
  bool has_closed_form_fourier() const noexcept { return bool(impl_->fourier); }
  const ShapeHints& hints() const noexcept { return impl_->hints; }

  /// Breakpoints for integrating this function over the line.
  std::vector<double> breakpoints() const;

  LineFunction scaled(cplx factor) const;

 private:
  struct Impl {
    Eval value;
    Eval fourier;
    ShapeHints hints;
    bool real = false;
    bool zero = false;
  };
  std::shared_ptr<const Impl> impl_;
};

/// f(y) / (y - z) for z in the upper half-plane. Its transform is
///   i * int_0^inf f^(xi + s) e^{i z s} ds.
LineFunction divide_by_pole(const LineFunction& f, cplx z);

enum class FamilyTag { Gaussian, Lorentzian, Sech2, Rational, SpikeTrain, CustomSampled, Zero };
enum class GrowthClass { Bounded, Sublinear, Linear };

std::string to_string(FamilyTag tag);
std::string to_string(GrowthClass growth);

/// Real initial datum u0 with its family metadata.
class RealLineFunction {
 public:
  struct Traits {
    FamilyTag family = FamilyTag::Zero;
    GrowthClass growth = GrowthClass::Bounded;
    /// C1 with |u0| + |u0'| -> 0: the class where the branch formula holds.
    bool c1_with_decay = true;
    std::string description;
  };

  RealLineFunction();
  RealLineFunction(LineFunction f, std::function<double(double)> derivative, Traits traits);

  double operator()(double x) const { return f_(x).real(); }
  std::optional<double> derivative(double x) const;
  bool has_derivative() const noexcept { return bool(derivative_); }

  const LineFunction& line() const noexcept { return f_; }
  const Traits& traits() const noexcept { return traits_; }
  FamilyTag family() const noexcept { return traits_.family; }
  GrowthClass growth() const noexcept { return traits_.growth; }
  bool is_zero() const noexcept { return f_.is_zero(); }

  std::vector<double> sample(std::span<const double> xs) const;

  /// Fine-grid sup of |u0| over [-window, window], feature points included.
  double sup_abs(double window) const;
  /// Fine-grid sup of |u0'| over [-window, window].
  double lipschitz(double window) const;
  /// sup |u0(x)| / <x> over the window; the constant C of |u0| <= C<x>.
  double growth_constant(double window) const;
  /// sup |u0(x)| * weight(x) over the window, with extra scan points.
  double sup_weighted(double window, const std::function<double(double)>& weight,
                      std::span<const double> extra = {}) const;

  /// Discrete L2 norm squared over [-window, window].
  double l2_norm_sq(double window) const;

  RealLineFunction scaled(double factor) const;

 private:
  std::vector<double> scan_points(double window) const;

  LineFunction f_;
  std::function<double(double)> derivative_;
  Traits traits_;
};

}  // namespace bozd
