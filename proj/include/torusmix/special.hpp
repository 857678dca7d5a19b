// Modified Bessel functions of the first kind (integer order) evaluated in
// log space, and a two-dimensional Sobol sequence.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace torusmix {

// log I_m(x) for m >= 0, x >= 0. Returns -inf for I_m(0) with m > 0.
// Throws DomainError for negative m or x.
double log_bessel_i(int m, double x);

// log I_m(x) for every m in [0, max_order], sharing one recurrence pass.
std::vector<double> log_bessel_i_upto(int max_order, double x);

// log(I_m(x) / x^m), finite at x = 0 where it equals -m log 2 - log m!.
double log_bessel_i_over_power(int m, double x);

// I_m(x) for any real x using I_m(-x) = (-1)^m I_m(x). May overflow to
// +-inf for |x| beyond ~700.
double bessel_i_signed(int m, double x);

// I_1(x) / I_0(x) for x >= 0.
double bessel_i_ratio(double x);

struct QrndConfig {
  std::size_t n_qrnd = 10000;
};

using Point2 = std::array<double, 2>;

// First n points of the 2-D Sobol sequence (Joe-Kuo direction numbers),
// skipping the origin; every point lies strictly inside (0,1)^2.
std::vector<Point2> sobol_2d(std::size_t n);

}  // namespace torusmix
