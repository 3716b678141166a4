#include "bozd/families.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bozd::families {

namespace {

std::string describe(const char* name, std::initializer_list<double> params) {
  std::ostringstream os;
  os.precision(12);
  os << name << '(';
  bool first = true;
  for (double p : params) {
    if (!first) os << ", ";
    os << p;
    first = false;
  }
  os << ')';
  return os.str();
}

cplx pole_fourier(const std::vector<Pole>& poles, double xi) {
  cplx acc{};
  for (const auto& p : poles) {
    if (p.location.imag() < 0.0) {
      if (xi >= 0.0) acc += -2.0 * kPi * kI * p.residue * std::exp(-kI * p.location * xi);
    } else {
      if (xi < 0.0) acc += 2.0 * kPi * kI * p.residue * std::exp(-kI * p.location * xi);
    }
  }
  return acc;
}

ShapeHints pole_hints(const std::vector<Pole>& poles) {
  ShapeHints h;
  double max_re = 0.0, max_im = 0.0, min_im = 1e300;
  for (const auto& p : poles) {
    h.features.push_back(p.location.real());
    max_re = std::max(max_re, std::abs(p.location.real()));
    max_im = std::max(max_im, std::abs(p.location.imag()));
    min_im = std::min(min_im, std::abs(p.location.imag()));
  }
  std::sort(h.features.begin(), h.features.end());
  h.features.erase(std::unique(h.features.begin(), h.features.end()), h.features.end());
  h.scale = std::max(max_im, 1e-3);
  h.min_width = std::max(min_im, 1e-3);
  h.extent = max_re + 10.0 * std::max(max_im, 1.0);
  return h;
}

void check_poles(const std::vector<Pole>& poles) {
  for (const auto& p : poles)
    if (p.location.imag() == 0.0)
      throw ValidationError("pole_sum: poles on the real axis are not square integrable");
}

}  // namespace

RealLineFunction gaussian(double a, double sigma, double center) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian: sigma must be > 0");
  if (a == 0.0) return zero();
  auto value = [=](double x) {
    const double s = (x - center) / sigma;
    return cplx(a * std::exp(-s * s), 0.0);
  };
  auto four = [=](double xi) {
    const double amp = a * sigma * std::sqrt(kPi) * std::exp(-0.25 * sigma * sigma * xi * xi);
    return amp * std::exp(cplx(0.0, -center * xi));
  };
  auto deriv = [=](double x) {
    const double s = (x - center) / sigma;
    return -2.0 * s / sigma * a * std::exp(-s * s);
  };
  ShapeHints h{{center}, sigma, std::abs(center) + 6.5 * sigma, sigma};
  return RealLineFunction(LineFunction(value, four, h, true), deriv,
                          {FamilyTag::Gaussian, GrowthClass::Bounded, true,
                           describe("gaussian", {a, sigma, center})});
}

RealLineFunction lorentzian(double a) {
  if (a == 0.0) return zero();
  auto value = [=](double x) { return cplx(a / (1.0 + x * x), 0.0); };
  auto four = [=](double xi) { return cplx(a * kPi * std::exp(-std::abs(xi)), 0.0); };
  auto deriv = [=](double x) {
    const double d = 1.0 + x * x;
    return -2.0 * a * x / (d * d);
  };
  ShapeHints h{{0.0}, 1.0, 10.0, 1.0};
  return RealLineFunction(LineFunction(value, four, h, true), deriv,
                          {FamilyTag::Lorentzian, GrowthClass::Bounded, true,
                           describe("lorentzian", {a})});
}

RealLineFunction sech2(double a, double w) {
  if (!(w > 0.0)) throw ValidationError("sech2: width must be > 0");
  if (a == 0.0) return zero();
  auto value = [=](double x) {
    const double c = 1.0 / std::cosh(x / w);
    return cplx(a * c * c, 0.0);
  };
  auto four = [=](double xi) {
    // int sech^2(s) e^{-iks} ds = pi k / sinh(pi k / 2), k = w xi
    const double k = w * xi;
    const double q = 0.5 * kPi * std::abs(k);
    double ratio;
    if (q < 1e-8) ratio = 2.0;
    else ratio = 2.0 * kPi * std::abs(k) * std::exp(-q) / (-std::expm1(-2.0 * q));
    return cplx(a * w * ratio, 0.0);
  };
  auto deriv = [=](double x) {
    const double c = 1.0 / std::cosh(x / w);
    return -2.0 * a / w * c * c * std::tanh(x / w);
  };
  ShapeHints h{{0.0}, w, 25.0 * w, w};
  return RealLineFunction(LineFunction(value, four, h, true), deriv,
                          {FamilyTag::Sech2, GrowthClass::Bounded, true,
                           describe("sech2", {a, w})});
}

LineFunction pole_sum(const std::vector<Pole>& poles) {
  check_poles(poles);
  if (poles.empty()) return LineFunction{};
  auto value = [poles](double x) {
    cplx acc{};
    for (const auto& p : poles) acc += p.residue / (x - p.location);
    return acc;
  };
  auto four = [poles](double xi) { return pole_fourier(poles, xi); };
  // Realness: sample the imaginary part against the magnitude.
  bool real = true;
  for (double x : {-3.7, -1.1, 0.0, 0.4, 2.9, 11.3}) {
    const cplx v = value(x);
    if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v))) real = false;
  }
  auto v = real ? LineFunction::Eval([value](double x) { return cplx(value(x).real(), 0.0); })
                : LineFunction::Eval(value);
  return LineFunction(v, four, pole_hints(poles), real);
}

RealLineFunction real_pole_sum(const std::vector<Pole>& poles) {
  auto f = pole_sum(poles);
  if (!f.is_real()) throw ValidationError("real_pole_sum: poles and residues do not give a real function");
  auto deriv = [poles](double x) {
    cplx acc{};
    for (const auto& p : poles) acc -= p.residue / ((x - p.location) * (x - p.location));
    return acc.real();
  };
  return RealLineFunction(f, deriv, {FamilyTag::Rational, GrowthClass::Bounded, true, "pole_sum"});
}

RealLineFunction rational(const std::vector<LorentzTerm>& terms) {
  std::vector<Pole> poles;
  std::ostringstream os;
  os << "rational(";
  for (const auto& t : terms) {
    if (!(t.width > 0.0)) throw ValidationError("rational: Lorentzian width must be > 0");
    const cplx r = t.amplitude * t.width / (2.0 * kI);
    poles.push_back({r, cplx(t.center, t.width)});
    poles.push_back({-r, cplx(t.center, -t.width)});
    os << '[' << t.amplitude << ',' << t.center << ',' << t.width << ']';
  }
  os << ')';
  if (poles.empty()) return zero();
  auto base = real_pole_sum(poles);
  auto traits = base.traits();
  traits.description = os.str();
  auto deriv = [terms](double x) {
    double acc = 0.0;
    for (const auto& t : terms) {
      const double d = (x - t.center) * (x - t.center) + t.width * t.width;
      acc += -2.0 * t.amplitude * t.width * t.width * (x - t.center) / (d * d);
    }
    return acc;
  };
  return RealLineFunction(base.line(), deriv, traits);
}

RealLineFunction spike_train(double base, double decay, double exponent, int count) {
  if (!(decay > 0.0)) throw ValidationError("spike_train: decay must be > 0");
  if (count < 1 || count > 12) throw ValidationError("spike_train: count must be in 1..12");
  if (exponent < 0.0 || exponent > 1.0)
    throw ValidationError("spike_train: exponent must lie in [0, 1]");
  if (base == 0.0) return zero();
  struct Bump {
    double center, height, width;
  };
  std::vector<Bump> bumps;
  ShapeHints h;
  h.min_width = 1e300;
  h.scale = 1.0;
  for (int n = 1; n <= count; ++n) {
    const double xn = std::ldexp(1.0, n);
    const double height = base * std::pow(xn, exponent);
    const double width = decay * std::pow(xn, -(1.0 + 2.0 * exponent));
    for (double s : {-1.0, 1.0}) {
      bumps.push_back({s * xn, height, width});
      h.features.push_back(s * xn);
    }
    h.min_width = std::min(h.min_width, width);
    h.extent = std::max(h.extent, xn + 8.0 * width);
  }
  std::sort(h.features.begin(), h.features.end());
  auto value = [bumps](double x) {
    double acc = 0.0;
    for (const auto& b : bumps) {
      const double s = (x - b.center) / b.width;
      if (std::abs(s) < 40.0) acc += b.height * std::exp(-s * s);
    }
    return cplx(acc, 0.0);
  };
  auto four = [bumps](double xi) {
    cplx acc{};
    for (const auto& b : bumps) {
      const double amp = b.height * b.width * std::sqrt(kPi) *
                         std::exp(-0.25 * b.width * b.width * xi * xi);
      acc += amp * std::exp(cplx(0.0, -b.center * xi));
    }
    return acc;
  };
  auto deriv = [bumps](double x) {
    double acc = 0.0;
    for (const auto& b : bumps) {
      const double s = (x - b.center) / b.width;
      if (std::abs(s) < 40.0) acc += -2.0 * s / b.width * b.height * std::exp(-s * s);
    }
    return acc;
  };
  const GrowthClass growth = exponent < 1.0 ? GrowthClass::Sublinear : GrowthClass::Linear;
  // The family's limit object has |u0'| unbounded, so it is outside the
  // C1-with-decay class even though each truncation is smooth.
  return RealLineFunction(LineFunction(value, four, h, true), deriv,
                          {FamilyTag::SpikeTrain, growth, false,
                           describe("spike_train", {base, decay, exponent, double(count)})});
}

RealLineFunction custom_sampled(std::vector<double> x, std::vector<double> u) {
  if (x.size() != u.size()) throw ValidationError("custom_sampled: x and u differ in length");
  if (x.size() < 8) throw ValidationError("custom_sampled: need at least 8 samples");
  const std::size_t n = x.size();
  const double dx = (x.back() - x.front()) / double(n - 1);
  if (!(dx > 0.0)) throw ValidationError("custom_sampled: x must be increasing");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(x[i] - (x.front() + dx * double(i))) > 1e-9 * std::max(1.0, std::abs(x[i])))
      throw ValidationError("custom_sampled: x must be uniformly spaced");
    if (!std::isfinite(u[i])) throw ValidationError("custom_sampled: non-finite sample");
  }
  const double x0 = x.front();
  auto sample = [u](long i) -> double {
    if (i < 0 || i >= long(u.size())) return 0.0;
    return u[std::size_t(i)];
  };
  // Catmull-Rom cubic between samples, zero outside the sampled range.
  auto value = [=](double xq) {
    const double s = (xq - x0) / dx;
    if (s < 0.0 || s > double(n - 1)) return cplx{};
    const long i = std::min(long(std::floor(s)), long(n) - 2);
    const double r = s - double(i);
    const double p0 = sample(i - 1), p1 = sample(i), p2 = sample(i + 1), p3 = sample(i + 2);
    const double v = p1 + 0.5 * r * (p2 - p0 + r * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                                                     r * (3.0 * (p1 - p2) + p3 - p0)));
    return cplx(v, 0.0);
  };
  auto deriv = [=](double xq) {
    const double s = (xq - x0) / dx;
    if (s < 0.0 || s > double(n - 1)) return 0.0;
    const long i = std::min(long(std::floor(s)), long(n) - 2);
    const double r = s - double(i);
    const double p0 = sample(i - 1), p1 = sample(i), p2 = sample(i + 1), p3 = sample(i + 2);
    const double d = 0.5 * (p2 - p0 + 2.0 * r * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                            3.0 * r * r * (3.0 * (p1 - p2) + p3 - p0));
    return d / dx;
  };
  auto four = [=](double xi) {
    // Trapezoid sum, phase advanced by recurrence.
    const cplx step = std::exp(cplx(0.0, -dx * xi));
    cplx phase = std::exp(cplx(0.0, -x0 * xi));
    cplx acc{};
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
      acc += w * u[i] * phase;
      phase *= step;
      if ((i & 63) == 63) phase = std::exp(cplx(0.0, -(x0 + dx * double(i + 1)) * xi));
    }
    return acc * dx;
  };
  ShapeHints h;
  h.extent = std::max(std::abs(x.front()), std::abs(x.back()));
  h.scale = std::max(1.0, 0.1 * h.extent);
  h.min_width = 4.0 * dx;
  h.features = {x.front(), x.back()};
  const bool decays = std::abs(u.front()) + std::abs(u.back()) <=
                      1e-6 * (1.0 + *std::max_element(u.begin(), u.end(),
                                                      [](double a, double b) { return std::abs(a) < std::abs(b); }));
  return RealLineFunction(LineFunction(value, four, h, true), deriv,
                          {FamilyTag::CustomSampled, GrowthClass::Bounded, decays,
                           "custom-sampled(" + std::to_string(n) + " samples)"});
}

RealLineFunction zero() { return RealLineFunction{}; }

}  // namespace bozd::families
