#include "torusmix/special.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "torusmix/model.hpp"

namespace torusmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Below this argument the power series is used directly.
constexpr double kSeriesLimit = 15.0;
// Above this argument the ratio recurrence would need too many steps; the
// per-order asymptotic expansions take over.
constexpr double kRecurrenceLimit = 1.0e4;

void check_args(int m, double x) {
  if (m < 0) throw DomainError("Bessel order must be non-negative");
  if (!(x >= 0.0)) throw DomainError("Bessel argument must be non-negative");
}

// sum_k (x/2)^{2k} / (k! (k+m)!) scaled by (x/2)^m / m!, in log space.
double log_series(int m, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 10000; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k + m));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return m * std::log(0.5 * x) - std::lgamma(m + 1.0) + std::log(sum);
}

// Large-argument (Hankel) expansion:
// I_m(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(m) / x^k.
double log_hankel(int m, double x) {
  const double mu = 4.0 * m * static_cast<double>(m);
  double term = 1.0;
  double sum = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * (-(mu - odd * odd)) / (8.0 * k * x);
    if (std::abs(next) > std::abs(prev)) break;
    term = next;
    sum += term;
    prev = term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(kTwoPi * x) + std::log(sum);
}

// Uniform (Debye) expansion in the order, accurate for large m.
double log_debye(int m, double x) {
  const double nu = m;
  const double z = x / nu;
  const double s = std::sqrt(1.0 + z * z);
  const double t = 1.0 / s;
  const double eta = s + std::log(z / (1.0 + s));
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
  const double u3 = t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
  const double u4 =
      t2 * t2 *
      (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0)))) /
      39813120.0;
  const double corr = 1.0 + u1 / nu + u2 / (nu * nu) + u3 / (nu * nu * nu) + u4 / (nu * nu * nu * nu);
  return nu * eta - 0.5 * std::log(kTwoPi * nu) - 0.5 * std::log(s) + std::log(corr);
}

double log_asymptotic(int m, double x) {
  const double mm = static_cast<double>(m);
  if (mm * mm <= 0.5 * x) return log_hankel(m, x);
  return log_debye(m, x);
}

// ratios[k] = I_{k+1}(x) / I_k(x) for k in [0, count), by backward recurrence
// started well beyond max(count, x) where the ratios are small.
std::vector<double> bessel_ratios(int count, double x) {
  const int start = static_cast<int>(std::max<double>(count, std::ceil(x))) + 50;
  const double n = start;
  double r = x / (n + 0.5 + std::sqrt((n + 1.5) * (n + 1.5) + x * x));
  std::vector<double> ratios(static_cast<std::size_t>(count));
  for (int k = start - 1; k >= 0; --k) {
    r = 1.0 / (2.0 * (k + 1) / x + r);
    if (k < count) ratios[static_cast<std::size_t>(k)] = r;
  }
  return ratios;
}

}  // namespace

double log_bessel_i(int m, double x) {
  check_args(m, x);
  if (x == 0.0) return m == 0 ? 0.0 : kNegInf;
  if (x < kSeriesLimit) return log_series(m, x);
  if (x > kRecurrenceLimit) return log_asymptotic(m, x);
  double out = log_hankel(0, x);
  if (m == 0) return out;
  for (double r : bessel_ratios(m, x)) out += std::log(r);
  return out;
}

std::vector<double> log_bessel_i_upto(int max_order, double x) {
  check_args(max_order, x);
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1);
  if (x == 0.0) {
    out.assign(out.size(), kNegInf);
    out[0] = 0.0;
    return out;
  }
  if (x > kRecurrenceLimit) {
    for (int m = 0; m <= max_order; ++m) out[static_cast<std::size_t>(m)] = log_asymptotic(m, x);
    return out;
  }
  out[0] = x < kSeriesLimit ? log_series(0, x) : log_hankel(0, x);
  if (max_order == 0) return out;
  const auto ratios = bessel_ratios(max_order, x);
  for (int m = 1; m <= max_order; ++m) {
    const auto k = static_cast<std::size_t>(m);
    out[k] = out[k - 1] + std::log(ratios[k - 1]);
  }
  return out;
}

double log_bessel_i_over_power(int m, double x) {
  check_args(m, x);
  if (x == 0.0) return -m * std::numbers::ln2 - std::lgamma(m + 1.0);
  return log_bessel_i(m, x) - m * std::log(x);
}

double bessel_i_signed(int m, double x) {
  if (m < 0) throw DomainError("Bessel order must be non-negative");
  const double mag = std::exp(log_bessel_i(m, std::abs(x)));
  return (x < 0.0 && (m % 2 == 1)) ? -mag : mag;
}

double bessel_i_ratio(double x) {
  check_args(0, x);
  if (x == 0.0) return 0.0;
  if (x < kSeriesLimit) return std::exp(log_series(1, x) - log_series(0, x));
  if (x > kRecurrenceLimit) return std::exp(log_asymptotic(1, x) - log_asymptotic(0, x));
  return bessel_ratios(1, x)[0];
}

std::vector<Point2> sobol_2d(std::size_t n) {
  if (n == 0) throw DomainError("sobol_2d needs n >= 1");
  if (n > 0xFFFFFFFFull) throw DomainError("sobol_2d supports at most 2^32 - 1 points");
  // Dimension 1: van der Corput. Dimension 2: primitive polynomial x + 1
  // with m_1 = 1, giving v_k = v_{k-1} ^ (v_{k-1} >> 1).
  std::array<std::uint32_t, 32> v1{};
  std::array<std::uint32_t, 32> v2{};
  for (int k = 0; k < 32; ++k) v1[static_cast<std::size_t>(k)] = 1u << (31 - k);
  v2[0] = 1u << 31;
  for (std::size_t k = 1; k < 32; ++k) v2[k] = v2[k - 1] ^ (v2[k - 1] >> 1);

  constexpr double scale = 1.0 / 4294967296.0;
  std::vector<Point2> out(n);
  std::uint32_t x1 = 0;
  std::uint32_t x2 = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto c = static_cast<std::size_t>(std::countr_zero(static_cast<std::uint32_t>(i)));
    x1 ^= v1[c];
    x2 ^= v2[c];
    out[i - 1] = {x1 * scale, x2 * scale};
  }
  return out;
}

}  // namespace torusmix
