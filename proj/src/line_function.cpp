#include "bozd/line_function.hpp"

#include <algorithm>
#include <cmath>

#include "bozd/quadrature.hpp"

namespace bozd {

LineFunction::LineFunction() {
  auto impl = std::make_shared<Impl>();
  impl->value = [](double) { return cplx{}; };
  impl->fourier = [](double) { return cplx{}; };
  impl->real = true;
  impl->zero = true;
  impl_ = std::move(impl);
}

LineFunction::LineFunction(Eval value, Eval fourier, ShapeHints hints, bool real) {
  auto impl = std::make_shared<Impl>();
  impl->value = std::move(value);
  impl->fourier = std::move(fourier);
  impl->hints = std::move(hints);
  impl->real = real;
  impl_ = std::move(impl);
}

std::vector<double> LineFunction::breakpoints() const {
  std::vector<double> pts = impl_->hints.features;
  const double e = impl_->hints.extent;
  pts.push_back(-e);
  pts.push_back(0.0);
  pts.push_back(e);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

cplx LineFunction::fourier(double xi) const {
  if (impl_->fourier) return impl_->fourier(xi);
  const auto& f = impl_->value;
  auto integrand = [&](double x) { return f(x) * std::exp(cplx(0.0, -x * xi)); };
  const auto pts = breakpoints();
  quad::Options opt;
  opt.abs_tol = 1e-13;
  opt.rel_tol = 1e-11;
  const auto r = quad::integrate_line(integrand, pts, impl_->hints.scale, opt);
  return r.value;
}

LineFunction LineFunction::scaled(cplx factor) const {
  if (is_zero() || factor == cplx{}) return LineFunction{};
  auto self = *this;
  Eval four;
  if (impl_->fourier) four = [self, factor](double xi) { return factor * self.fourier(xi); };
  const bool real = impl_->real && factor.imag() == 0.0;
  return LineFunction([self, factor](double x) { return factor * self(x); }, four, impl_->hints,
                      real);
}

LineFunction divide_by_pole(const LineFunction& f, cplx z) {
  if (z.imag() <= 0.0) throw ValidationError("divide_by_pole: Im z must be > 0");
  if (f.is_zero()) return LineFunction{};
  ShapeHints hints = f.hints();
  hints.features.push_back(z.real());
  hints.extent = std::max(hints.extent, std::abs(z.real()) + 1.0);
  const double ref = std::max(std::abs(f.fourier(0.0)), 1e-300);
  auto value = [f, z](double y) { return f(y) / (y - z); };
  auto four = [f, z, ref](double xi) {
    auto g = [&](double s) { return f.fourier(xi + s) * std::exp(kI * z * s); };
    quad::Options opt;
    opt.abs_tol = 1e-15 * ref;
    opt.rel_tol = 1e-13;
    const double kink = std::max(0.0, -xi);
    const double split = kink + 1.0;
    const double brk[] = {kink};
    const auto head = quad::integrate(g, 0.0, split, brk, opt);
    const auto tail = quad::integrate_right_tail(g, split, 1.0 / std::min(z.imag(), 1.0), opt);
    return kI * (head.value + tail.value);
  };
  return LineFunction(value, four, hints, false);
}

std::string to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::Gaussian: return "gaussian";
    case FamilyTag::Lorentzian: return "lorentzian";
    case FamilyTag::Sech2: return "sech2";
    case FamilyTag::Rational: return "rational";
    case FamilyTag::SpikeTrain: return "spike_train";
    case FamilyTag::CustomSampled: return "custom-sampled";
    case FamilyTag::Zero: return "zero";
  }
  return "unknown";
}

std::string to_string(GrowthClass growth) {
  switch (growth) {
    case GrowthClass::Bounded: return "bounded";
    case GrowthClass::Sublinear: return "sublinear";
    case GrowthClass::Linear: return "linear";
  }
  return "unknown";
}

RealLineFunction::RealLineFunction()
    : derivative_([](double) { return 0.0; }),
      traits_{FamilyTag::Zero, GrowthClass::Bounded, true, "zero"} {}

RealLineFunction::RealLineFunction(LineFunction f, std::function<double(double)> derivative,
                                   Traits traits)
    : f_(std::move(f)), derivative_(std::move(derivative)), traits_(std::move(traits)) {
  if (!f_.is_real()) throw ValidationError("RealLineFunction: underlying function is not real");
}

std::optional<double> RealLineFunction::derivative(double x) const {
  if (!derivative_) return std::nullopt;
  return derivative_(x);
}

std::vector<double> RealLineFunction::sample(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
  return out;
}

std::vector<double> RealLineFunction::scan_points(double window) const {
  const auto& h = f_.hints();
  const int n_uniform = 20001;
  std::vector<double> pts = quad::linspace(-window, window, n_uniform);
  const double coarse = 2.0 * window / (n_uniform - 1);
  if (h.min_width < 50.0 * coarse) {
    for (double c : h.features) {
      if (std::abs(c) > window) continue;
      const double w = h.min_width;
      for (double s : quad::linspace(c - 6.0 * w, c + 6.0 * w, 1201)) pts.push_back(s);
    }
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

namespace {

/// Refine a sampled maximum of g with successive parabolic steps.
template <class G>
double refine_max(G&& g, double left, double mid, double right) {
  double best = g(mid);
  double a = left, b = mid, c = right;
  for (int it = 0; it < 40; ++it) {
    const double fa = g(a), fb = g(b), fc = g(c);
    const double den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
    if (den == 0.0) break;
    double x = b - 0.5 * ((b - a) * (b - a) * (fb - fc) - (b - c) * (b - c) * (fb - fa)) / den;
    if (!(x > a && x < c)) break;
    const double fx = g(x);
    best = std::max(best, fx);
    if (std::abs(x - b) < 1e-12 * (1.0 + std::abs(b))) break;
    if (x < b) {
      if (fx >= fb) c = b, b = x;
      else a = x;
    } else {
      if (fx >= fb) a = b, b = x;
      else c = x;
    }
  }
  return best;
}

template <class G>
double scan_max(const std::vector<double>& pts, G&& g) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v = g(pts[i]);
    if (v > best) best = v, arg = i;
  }
  if (arg > 0 && arg + 1 < pts.size())
    best = std::max(best, refine_max(g, pts[arg - 1], pts[arg], pts[arg + 1]));
  return best;
}

}  // namespace

double RealLineFunction::sup_abs(double window) const {
  if (is_zero()) return 0.0;
  return scan_max(scan_points(window), [this](double x) { return std::abs((*this)(x)); });
}

double RealLineFunction::lipschitz(double window) const {
  if (is_zero()) return 0.0;
  if (!derivative_) throw RegimeRefusal("lipschitz: family exposes no derivative");
  return scan_max(scan_points(window), [this](double x) { return std::abs(derivative_(x)); });
}

double RealLineFunction::growth_constant(double window) const {
  if (is_zero()) return 0.0;
  return scan_max(scan_points(window),
                  [this](double x) { return std::abs((*this)(x)) / std::sqrt(1.0 + x * x); });
}

double RealLineFunction::sup_weighted(double window, const std::function<double(double)>& weight,
                                      std::span<const double> extra) const {
  if (is_zero()) return 0.0;
  auto pts = scan_points(window);
  for (double c : extra) {
    if (std::abs(c) > window) continue;
    for (double s : quad::linspace(c - 1.0, c + 1.0, 801)) pts.push_back(s);
  }
  std::sort(pts.begin(), pts.end());
  return scan_max(pts, [&](double x) { return std::abs((*this)(x)) * weight(x); });
}

double RealLineFunction::l2_norm_sq(double window) const {
  if (is_zero()) return 0.0;
  auto g = [this](double x) { const double v = (*this)(x); return cplx(v * v, 0.0); };
  auto pts = f_.breakpoints();
  quad::Options opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-12;
  return quad::integrate(g, -window, window, pts, opt).value.real();
}

RealLineFunction RealLineFunction::scaled(double factor) const {
  if (factor == 0.0 || is_zero()) return RealLineFunction{};
  std::function<double(double)> d;
  if (derivative_) d = [dd = derivative_, factor](double x) { return factor * dd(x); };
  Traits tr = traits_;
  tr.description = traits_.description + " *" + std::to_string(factor);
  return RealLineFunction(f_.scaled(factor), d, tr);
}

}  // namespace bozd
