// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library routine it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// I_m(x) by the plain power series in long double.
inline long double bessel_series(int m, double x) {
  const long double h = 0.5L * x;
  long double term = 1.0L;
  for (int k = 1; k <= m; ++k) term *= h / k;
  long double sum = term;
  for (int k = 1; k < 5000; ++k) {
    term *= h * h / (static_cast<long double>(k) * (k + m));
    sum += term;
    if (term < sum * 1e-21L) break;
  }
  return sum;
}

// Periodic trapezoid rule on [0, 2pi) with n nodes.
inline double integrate_1d(const std::function<double(double)>& f, int n) {
  const double h = kTwoPi / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(i * h);
  return s * h;
}

// Periodic trapezoid rule on [0, 2pi)^2 with n x n nodes.
inline double integrate_2d(const std::function<double(double, double)>& f, int n) {
  const double h = kTwoPi / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += f(i * h, j * h);
  return s * h * h;
}

// Wrapped normal density by direct summation over |omega| <= m.
inline double wnorm_direct(double psi, double mu, double kappa, int m) {
  double s = 0.0;
  for (int w = -m; w <= m; ++w) {
    const double d = psi - mu - kTwoPi * w;
    s += std::exp(-0.5 * kappa * d * d);
  }
  return std::sqrt(kappa / kTwoPi) * s;
}

// Bivariate wrapped normal density by direct summation over |omega_i| <= m.
inline double wnorm2_direct(double p1, double p2, double mu1, double mu2, double k1, double k2, double k3,
                            int m) {
  double s = 0.0;
  for (int a = -m; a <= m; ++a)
    for (int b = -m; b <= m; ++b) {
      const double d1 = p1 - mu1 - kTwoPi * a;
      const double d2 = p2 - mu2 - kTwoPi * b;
      s += std::exp(-0.5 * (k1 * d1 * d1 + k2 * d2 * d2 + 2.0 * k3 * d1 * d2));
    }
  return std::sqrt(k1 * k2 - k3 * k3) / kTwoPi * s;
}

inline double vmsin_exponent(double x, double y, double k1, double k2, double k3) {
  return k1 * std::cos(x) + k2 * std::cos(y) + k3 * std::sin(x) * std::sin(y);
}

inline double vmcos_exponent(double x, double y, double k1, double k2, double k3) {
  return k1 * std::cos(x) + k2 * std::cos(y) + k3 * std::cos(x - y);
}

// Count strict local maxima of a periodic n x n lattice of values
// (8-neighbourhood).
inline int count_modes(const std::vector<double>& v, int n) {
  int modes = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double c = v[static_cast<std::size_t>(i * n + j)];
      bool peak = true;
      for (int di = -1; di <= 1 && peak; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int a = (i + di + n) % n;
          const int b = (j + dj + n) % n;
          if (v[static_cast<std::size_t>(a * n + b)] >= c) {
            peak = false;
            break;
          }
        }
      if (peak) ++modes;
    }
  return modes;
}

// Exact two-sided Kolmogorov p-value approximation for statistic d at size n.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

// Upper-tail chi-square probability via the regularized incomplete gamma.
inline double chisq_upper(double x, int dof) {
  const double a = 0.5 * dof;
  const double z = 0.5 * x;
  if (z <= 0.0) return 1.0;
  if (z < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int k = 1; k < 10000; ++k) {
      term *= z / (a + k);
      sum += term;
      if (term < sum * 1e-15) break;
    }
    return 1.0 - std::exp(-z + a * std::log(z) - std::lgamma(a)) * sum;
  }
  // Lentz continued fraction for Q(a, z).
  double b = z + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-z + a * std::log(z) - std::lgamma(a)) * h;
}

struct VmPosteriorMean {
  double mu;     // circular posterior mean
  double kappa;  // posterior mean
};

// Posterior means for one von Mises component with a flat prior on mu and
// N(0, norm_var) on log kappa, by dense quadrature over (mu, log kappa).
inline VmPosteriorMean vm_grid_posterior(const std::vector<double>& psi, double norm_var, int n_mu = 720,
                                         int n_t = 1600, double t_lo = -4.0, double t_hi = 6.0) {
  double c = 0.0, s = 0.0;
  for (double x : psi) {
    c += std::cos(x);
    s += std::sin(x);
  }
  const double n = static_cast<double>(psi.size());
  const double ht = (t_hi - t_lo) / (n_t - 1);
  std::vector<double> logw;
  logw.reserve(static_cast<std::size_t>(n_mu) * n_t);
  double lmax = -1e300;
  for (int it = 0; it < n_t; ++it) {
    const double t = t_lo + it * ht;
    const double k = std::exp(t);
    const double log_i0 = static_cast<double>(std::log(bessel_series(0, k)));
    const double base = -n * (std::log(kTwoPi) + log_i0) - 0.5 * t * t / norm_var;
    for (int im = 0; im < n_mu; ++im) {
      const double mu = kTwoPi * im / n_mu;
      const double v = base + k * (c * std::cos(mu) + s * std::sin(mu));
      logw.push_back(v);
      lmax = std::max(lmax, v);
    }
  }
  double z = 0.0, ek = 0.0, ec = 0.0, es = 0.0;
  for (int it = 0; it < n_t; ++it) {
    const double k = std::exp(t_lo + it * ht);
    const double wt = (it == 0 || it == n_t - 1) ? 0.5 : 1.0;
    for (int im = 0; im < n_mu; ++im) {
      const double mu = kTwoPi * im / n_mu;
      const double w = wt * std::exp(logw[static_cast<std::size_t>(it) * n_mu + im] - lmax);
      z += w;
      ek += w * k;
      ec += w * std::cos(mu);
      es += w * std::sin(mu);
    }
  }
  double mu = std::atan2(es, ec);
  if (mu < 0.0) mu += kTwoPi;
  return {mu, ek / z};
}

// Mann-Kendall trend test: two-sided normal-approximation p-value (no ties
// correction).
inline double mann_kendall_pvalue(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += (x[j] > x[i]) - (x[j] < x[i]);
  const double dn = static_cast<double>(n);
  const double var = dn * (dn - 1.0) * (2.0 * dn + 5.0) / 18.0;
  const double z = s == 0.0 ? 0.0 : (s - (s > 0 ? 1.0 : -1.0)) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace oracle
