#pragma once

#include <vector>

#include "bozd/line_function.hpp"

namespace bozd::families {

/// a * exp(-((x - center)/sigma)^2)
RealLineFunction gaussian(double a, double sigma, double center = 0.0);

/// a / (1 + x^2)
RealLineFunction lorentzian(double a);

/// a * sech^2(x / w)
RealLineFunction sech2(double a, double w);

/// One term a * w^2 / ((x - c)^2 + w^2).
struct LorentzTerm {
  double amplitude;
  double center;
  double width;
};

/// Finite sum of shifted Lorentzians (real rational data).
RealLineFunction rational(const std::vector<LorentzTerm>& terms);

/// Simple pole r / (x - p), Im p != 0.
struct Pole {
  cplx residue;
  cplx location;
};

/// sum_k r_k / (x - p_k). Complex in general; used for the Hardy-space
/// test path (1/(x+i), 2x/(1+x^2), ...).
LineFunction pole_sum(const std::vector<Pole>& poles);

/// Same, as a real datum. Throws ValidationError if the sum is not real.
RealLineFunction real_pole_sum(const std::vector<Pole>& poles);

/// Gaussian bumps at x_n = +/-2^n, n = 1..count, with height
/// base * |x_n|^exponent and width decay * |x_n|^-(1 + 2 exponent), so the
/// L2 mass of each bump decays like 2^-n. exponent < 1 gives the sublinear
/// class (unbounded as count grows); exponent == 1 gives the linear class
/// |u0| <= C<x>.
RealLineFunction spike_train(double base, double decay, double exponent = 0.5, int count = 3);

/// Samples on a uniform grid, cubic interpolation, zero outside.
RealLineFunction custom_sampled(std::vector<double> x, std::vector<double> u);

RealLineFunction zero();

}  // namespace bozd::families
