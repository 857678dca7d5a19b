#include "torusmix/densities.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace torusmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog4Pi2 = 2.0 * kLogTwoPi;
constexpr double kSeriesTol = 1e-12;
constexpr int kMaxSeriesTerms = 512;

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Reduce to [-pi, pi).
double wrap_pm_pi(double x) {
  x = std::fmod(x + std::numbers::pi, kTwoPi);
  if (x < 0.0) x += kTwoPi;
  return x - std::numbers::pi;
}

void check_concentrations(double k1, double k2, double k3) {
  if (!std::isfinite(k1) || !std::isfinite(k2) || !std::isfinite(k3))
    throw DomainError("non-finite concentration");
  if (k1 < 0.0 || k2 < 0.0) throw DomainError("kappa1 and kappa2 must be non-negative");
}

struct QmcTable {
  std::vector<double> cx, sx, cy, sy;
};

const QmcTable& qmc_table(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<QmcTable>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    auto tab = std::make_unique<QmcTable>();
    const auto pts = sobol_2d(n);
    tab->cx.resize(n);
    tab->sx.resize(n);
    tab->cy.resize(n);
    tab->sy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = kTwoPi * pts[i][0];
      const double y = kTwoPi * pts[i][1];
      tab->cx[i] = std::cos(x);
      tab->sx[i] = std::sin(x);
      tab->cy[i] = std::cos(y);
      tab->sy[i] = std::sin(y);
    }
    slot = std::move(tab);
  }
  return *slot;
}

// Cbar = integral of exp(k1 cos x + k2 cos y + k3 g(x, y)) over the torus,
// estimated as 4 pi^2 times the mean over Sobol points; the derivative
// ratios are the matching weighted averages.
BivariateConstant qmc_constant(bool cosine, double k1, double k2, double k3, std::size_t n) {
  if (n == 0) throw DomainError("n_qrnd must be positive");
  const QmcTable& t = qmc_table(n);
  std::vector<double> h(n);
  double hmax = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = cosine ? t.cx[i] * t.cy[i] + t.sx[i] * t.sy[i] : t.sx[i] * t.sy[i];
    h[i] = k1 * t.cx[i] + k2 * t.cy[i] + k3 * g;
    hmax = std::max(hmax, h[i]);
  }
  double sw = 0, s1 = 0, s2 = 0, s3 = 0, s11 = 0, s22 = 0, s12 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(h[i] - hmax);
    const double g = cosine ? t.cx[i] * t.cy[i] + t.sx[i] * t.sy[i] : t.sx[i] * t.sy[i];
    sw += w;
    s1 += w * t.cx[i];
    s2 += w * t.cy[i];
    s3 += w * g;
    s11 += w * t.cx[i] * t.cx[i];
    s22 += w * t.cy[i] * t.cy[i];
    s12 += w * t.cx[i] * t.cy[i];
  }
  BivariateConstant out;
  out.log_c = kLog4Pi2 + hmax + std::log(sw / static_cast<double>(n));
  out.d1 = s1 / sw;
  out.d2 = s2 / sw;
  out.d3 = s3 / sw;
  out.d11 = s11 / sw;
  out.d22 = s22 / sw;
  out.d12 = s12 / sw;
  out.used_qmc = true;
  return out;
}

double log_binom_central(int m) { return std::lgamma(2.0 * m + 1.0) - 2.0 * std::lgamma(m + 1.0); }

// log I_m(k) / k^m, finite at k = 0.
double log_i_over_pow(const std::vector<double>& a, double k, double lk, int m) {
  if (k > 0.0) return a[static_cast<std::size_t>(m)] - m * lk;
  return -m * std::numbers::ln2 - std::lgamma(m + 1.0);
}

// log I_{m+s}(k) / k^m for shift s >= 1; zero (-inf) at k = 0.
double log_i_shift(const std::vector<double>& a, double k, double lk, int m, int s) {
  if (k > 0.0) return a[static_cast<std::size_t>(m + s)] - m * lk;
  return kNegInf;
}

struct LogAccum {
  double sum = kNegInf;
  bool small_tail(double term) const {
    return term == kNegInf || (sum != kNegInf && term - sum < std::log(kSeriesTol));
  }
  void add(double term) { sum = log_add_exp(sum, term); }
};

bool vmsin_series(double k1, double k2, double k3, BivariateConstant& out) {
  const double lk1 = k1 > 0.0 ? std::log(k1) : 0.0;
  const double lk2 = k2 > 0.0 ? std::log(k2) : 0.0;
  const double lk3 = k3 != 0.0 ? std::log(std::abs(k3)) : kNegInf;
  const double lratio = 2.0 * lk3 - std::log(4.0);
  for (int n_terms = 64; n_terms <= kMaxSeriesTerms; n_terms *= 2) {
    const auto a1 = log_bessel_i_upto(n_terms + 2, k1);
    const auto a2 = log_bessel_i_upto(n_terms + 2, k2);
    LogAccum c, d1, d2, d3, d11, d22, d12;
    double prev = kNegInf;
    bool converged = false;
    for (int m = 0; m <= n_terms; ++m) {
      if (m > 0 && k3 == 0.0) {
        converged = true;
        break;
      }
      const double base = m == 0 ? 0.0 : log_binom_central(m) + m * lratio;
      const double p1 = log_i_over_pow(a1, k1, lk1, m);
      const double p2 = log_i_over_pow(a2, k2, lk2, m);
      const double q1 = log_i_shift(a1, k1, lk1, m, 1);
      const double q2 = log_i_shift(a2, k2, lk2, m, 1);
      const double r1 = log_add_exp(log_i_over_pow(a1, k1, lk1, m + 1), log_i_shift(a1, k1, lk1, m, 2));
      const double r2 = log_add_exp(log_i_over_pow(a2, k2, lk2, m + 1), log_i_shift(a2, k2, lk2, m, 2));
      const double tc = base + p1 + p2;
      const double t1 = base + q1 + p2;
      const double t2 = base + p1 + q2;
      const double t12 = base + q1 + q2;
      const double t11 = base + r1 + p2;
      const double t22 = base + p1 + r2;
      const double t3 = m == 0 ? kNegInf
                               : std::log(2.0 * m) + log_binom_central(m) + (2.0 * m - 1.0) * lk3 -
                                     m * std::log(4.0) + p1 + p2;
      c.add(tc);
      d1.add(t1);
      d2.add(t2);
      d3.add(t3);
      d11.add(t11);
      d22.add(t22);
      d12.add(t12);
      if (m >= 1 && tc < prev && c.small_tail(tc) && d1.small_tail(t1) && d2.small_tail(t2) &&
          d3.small_tail(t3) && d11.small_tail(t11) && d22.small_tail(t22) && d12.small_tail(t12)) {
        converged = true;
        break;
      }
      prev = tc;
    }
    if (!converged) continue;
    out = BivariateConstant{};
    out.log_c = kLog4Pi2 + c.sum;
    out.d1 = std::exp(d1.sum - c.sum);
    out.d2 = std::exp(d2.sum - c.sum);
    out.d3 = (k3 < 0.0 ? -1.0 : 1.0) * std::exp(d3.sum - c.sum);
    out.d11 = std::exp(d11.sum - c.sum);
    out.d22 = std::exp(d22.sum - c.sum);
    out.d12 = std::exp(d12.sum - c.sum);
    return std::isfinite(out.log_c);
  }
  return false;
}

bool vmcos_series(double k1, double k2, double k3, BivariateConstant& out) {
  const double a3 = std::abs(k3);
  const int n_max = std::min(kMaxSeriesTerms, static_cast<int>(std::ceil(std::max({k1, k2, a3}))) + 48);
  const auto l1 = log_bessel_i_upto(n_max + 2, k1);
  const auto l2 = log_bessel_i_upto(n_max + 2, k2);
  const auto l3 = log_bessel_i_upto(n_max + 2, a3);
  // Exponentially scaled values I_m(|x|) e^{-|x|}, signed for kappa3 < 0.
  std::vector<double> e1(l1.size()), e2(l2.size()), e3(l3.size());
  for (std::size_t m = 0; m < l1.size(); ++m) {
    e1[m] = std::exp(l1[m] - k1);
    e2[m] = std::exp(l2[m] - k2);
    e3[m] = std::exp(l3[m] - a3);
    if (k3 < 0.0 && (m % 2 == 1)) e3[m] = -e3[m];
  }
  auto at = [](const std::vector<double>& e, int m) { return e[static_cast<std::size_t>(std::abs(m))]; };

  double s = e1[0] * e2[0] * e3[0];
  double d1 = e1[1] * e2[0] * e3[0];
  double d2 = e1[0] * e2[1] * e3[0];
  double d3 = e1[0] * e2[0] * e3[1];
  double d11 = (e1[0] + e1[2]) * e2[0] * e3[0];
  double d22 = e1[0] * (e2[0] + e2[2]) * e3[0];
  double d12 = 2.0 * e1[1] * e2[1] * e3[0];
  bool converged = false;
  auto small = [](double term, double sum) { return std::abs(term) <= kSeriesTol * std::abs(sum) + 1e-300; };
  for (int n = 1; n <= n_max; ++n) {
    const double tc = 2.0 * at(e1, n) * at(e2, n) * at(e3, n);
    const double t1 = at(e2, n) * at(e3, n) * (at(e1, n + 1) + at(e1, n - 1));
    const double t2 = at(e1, n) * at(e3, n) * (at(e2, n + 1) + at(e2, n - 1));
    const double t3 = at(e1, n) * at(e2, n) * (at(e3, n + 1) + at(e3, n - 1));
    const double t11 = at(e2, n) * at(e3, n) * (at(e1, n - 2) + 2.0 * at(e1, n) + at(e1, n + 2));
    const double t22 = at(e1, n) * at(e3, n) * (at(e2, n - 2) + 2.0 * at(e2, n) + at(e2, n + 2));
    const double t12 = at(e3, n) * (at(e1, n - 1) + at(e1, n + 1)) * (at(e2, n - 1) + at(e2, n + 1));
    s += tc;
    d1 += t1;
    d2 += t2;
    d3 += t3;
    d11 += t11;
    d22 += t22;
    d12 += t12;
    if (small(tc, s) && small(t1, d1) && small(t2, d2) && small(t3, d3) && small(t11, d11) &&
        small(t22, d22) && small(t12, d12)) {
      converged = true;
      break;
    }
  }
  if (!converged || !(s > 0.0)) return false;
  out = BivariateConstant{};
  out.log_c = kLog4Pi2 + k1 + k2 + a3 + std::log(s);
  out.d1 = d1 / s;
  out.d2 = d2 / s;
  out.d3 = d3 / s;
  out.d11 = d11 / (2.0 * s);
  out.d22 = d22 / (2.0 * s);
  out.d12 = d12 / (2.0 * s);
  return true;
}

}  // namespace

double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

bool vmcos_uses_qmc(double k1, double k2, double k3) {
  return k3 < -5.0 || std::max({k1, k2, std::abs(k3)}) > 50.0;
}

BivariateConstant vmsin_constant(double k1, double k2, double k3, const QrndConfig& q, ConstMethod method) {
  check_concentrations(k1, k2, k3);
  if (method == ConstMethod::Qmc) return qmc_constant(false, k1, k2, k3, q.n_qrnd);
  BivariateConstant out;
  if (vmsin_series(k1, k2, k3, out)) return out;
  if (method == ConstMethod::Series) throw NumericError("vmsin constant series did not converge");
  return qmc_constant(false, k1, k2, k3, q.n_qrnd);
}

BivariateConstant vmcos_constant(double k1, double k2, double k3, const QrndConfig& q, ConstMethod method) {
  check_concentrations(k1, k2, k3);
  if (method == ConstMethod::Qmc || (method == ConstMethod::Auto && vmcos_uses_qmc(k1, k2, k3)))
    return qmc_constant(true, k1, k2, k3, q.n_qrnd);
  BivariateConstant out;
  if (vmcos_series(k1, k2, k3, out)) return out;
  if (method == ConstMethod::Series) throw NumericError("vmcos constant series did not converge");
  return qmc_constant(true, k1, k2, k3, q.n_qrnd);
}

double vmsin_const(double k1, double k2, double k3, const QrndConfig& q) {
  return std::exp(vmsin_constant(k1, k2, k3, q).log_c);
}

double vmcos_const(double k1, double k2, double k3, const QrndConfig& q) {
  return std::exp(vmcos_constant(k1, k2, k3, q).log_c);
}

TrigData::TrigData(const AngleData& data) : dim_(data.dim()), n_(data.size()), angle_(data.values()) {
  cos_.resize(angle_.size());
  sin_.resize(angle_.size());
  for (std::size_t k = 0; k < angle_.size(); ++k) {
    cos_[k] = std::cos(angle_[k]);
    sin_[k] = std::sin(angle_[k]);
  }
}

ComponentDensity::ComponentDensity(ModelKind kind, const ComponentParams& p, const DispConfig& d,
                                   const QrndConfig& q)
    : kind_(kind), p_(p), int_displ_(d.int_displ) {
  validate_params(kind, p);
  if (d.int_displ < 1 || d.int_displ > 5) throw DomainError("int_displ must be in 1..5");
  cmu1_ = std::cos(p.mu1);
  smu1_ = std::sin(p.mu1);
  cmu2_ = std::cos(p.mu2);
  smu2_ = std::sin(p.mu2);
  switch (kind) {
    case ModelKind::WN:
      uniform_ = p.kappa1 == 0.0;
      log_norm_ = uniform_ ? -kLogTwoPi : 0.5 * (std::log(p.kappa1) - kLogTwoPi);
      break;
    case ModelKind::VM:
      log_norm_ = -kLogTwoPi - log_bessel_i(0, p.kappa1);
      aux_ = bessel_i_ratio(p.kappa1);
      break;
    case ModelKind::WN2:
      uniform_ = p.kappa1 == 0.0 && p.kappa2 == 0.0 && p.kappa3 == 0.0;
      aux_ = p.kappa1 * p.kappa2 - p.kappa3 * p.kappa3;
      log_norm_ = uniform_ ? -2.0 * kLogTwoPi : 0.5 * std::log(aux_) - kLogTwoPi;
      break;
    case ModelKind::VMSIN:
      bc_ = vmsin_constant(p.kappa1, p.kappa2, p.kappa3, q);
      log_norm_ = -bc_.log_c;
      break;
    case ModelKind::VMCOS:
      bc_ = vmcos_constant(p.kappa1, p.kappa2, p.kappa3, q);
      log_norm_ = -bc_.log_c;
      break;
  }
}

double ComponentDensity::wn_eval(double psi, double* grad) const {
  if (uniform_) {
    if (grad) {
      grad[0] = std::numeric_limits<double>::infinity();
      grad[1] = 0.0;
    }
    return log_norm_;
  }
  const double k = p_.kappa1;
  const double d0 = wrap_pm_pi(psi - p_.mu1);
  // With |d0| <= pi the omega = 0 term is the largest.
  const double e0 = -0.5 * k * d0 * d0;
  double sw = 0.0, sk = 0.0, sm = 0.0;
  for (int w = -int_displ_; w <= int_displ_; ++w) {
    const double dd = d0 + kTwoPi * w;
    const double wt = std::exp(-0.5 * k * dd * dd - e0);
    sw += wt;
    if (grad) {
      sk += wt * (1.0 - k * dd * dd);
      sm += wt * dd;
    }
  }
  if (grad) {
    grad[0] = sk / (2.0 * k * sw);
    grad[1] = k * sm / sw;
  }
  return log_norm_ + e0 + std::log(sw);
}

double ComponentDensity::wn2_eval(double psi1, double psi2, double* grad) const {
  if (uniform_) {
    if (grad) std::fill(grad, grad + 5, 0.0);
    return log_norm_;
  }
  const double k1 = p_.kappa1, k2 = p_.kappa2, k3 = p_.kappa3, det = aux_;
  if (det <= 0.0) {
    if (grad) std::fill(grad, grad + 5, std::numeric_limits<double>::quiet_NaN());
    return kNegInf;
  }
  const double a1 = wrap_pm_pi(psi1 - p_.mu1);
  const double a2 = wrap_pm_pi(psi2 - p_.mu2);
  const int width = 2 * int_displ_ + 1;
  std::array<double, 121> ex{};
  double emax = kNegInf;
  for (int i = 0; i < width; ++i) {
    const double d1 = a1 + kTwoPi * (i - int_displ_);
    for (int j = 0; j < width; ++j) {
      const double d2 = a2 + kTwoPi * (j - int_displ_);
      const double e = -0.5 * (k1 * d1 * d1 + k2 * d2 * d2 + 2.0 * k3 * d1 * d2);
      ex[static_cast<std::size_t>(i * width + j)] = e;
      emax = std::max(emax, e);
    }
  }
  double sw = 0, g1 = 0, g2 = 0, g3 = 0, gm1 = 0, gm2 = 0;
  for (int i = 0; i < width; ++i) {
    const double d1 = a1 + kTwoPi * (i - int_displ_);
    for (int j = 0; j < width; ++j) {
      const double d2 = a2 + kTwoPi * (j - int_displ_);
      const double w = std::exp(ex[static_cast<std::size_t>(i * width + j)] - emax);
      sw += w;
      if (grad) {
        g1 += w * (k2 - det * d1 * d1);
        g2 += w * (k1 - det * d2 * d2);
        g3 += w * (k3 + det * d1 * d2);
        gm1 += w * (k1 * d1 + k3 * d2);
        gm2 += w * (k3 * d1 + k2 * d2);
      }
    }
  }
  if (grad) {
    grad[0] = g1 / (2.0 * det * sw);
    grad[1] = g2 / (2.0 * det * sw);
    grad[2] = -g3 / (det * sw);
    grad[3] = gm1 / sw;
    grad[4] = gm2 / sw;
  }
  return log_norm_ + emax + std::log(sw);
}

double ComponentDensity::vm_eval(double c, double s, double* grad) const {
  if (grad) {
    grad[0] = c - aux_;
    grad[1] = p_.kappa1 * s;
  }
  return p_.kappa1 * c + log_norm_;
}

double ComponentDensity::biv_eval(double c1, double s1, double c2, double s2, double* grad) const {
  const double k1 = p_.kappa1, k2 = p_.kappa2, k3 = p_.kappa3;
  if (kind_ == ModelKind::VMSIN) {
    if (grad) {
      grad[0] = c1 - bc_.d1;
      grad[1] = c2 - bc_.d2;
      grad[2] = s1 * s2 - bc_.d3;
      grad[3] = k1 * s1 - k3 * c1 * s2;
      grad[4] = k2 * s2 - k3 * s1 * c2;
    }
    return k1 * c1 + k2 * c2 + k3 * s1 * s2 + log_norm_;
  }
  const double cd = c1 * c2 + s1 * s2;  // cos(d1 - d2)
  if (grad) {
    const double sd = s1 * c2 - c1 * s2;  // sin(d1 - d2)
    grad[0] = c1 - bc_.d1;
    grad[1] = c2 - bc_.d2;
    grad[2] = cd - bc_.d3;
    grad[3] = k1 * s1 + k3 * sd;
    grad[4] = k2 * s2 - k3 * sd;
  }
  return k1 * c1 + k2 * c2 + k3 * cd + log_norm_;
}

double ComponentDensity::logpdf(std::span<const double> psi) const {
  return logpdf_grad(psi, {});
}

double ComponentDensity::logpdf_grad(std::span<const double> psi, std::span<double> out) const {
  if (static_cast<int>(psi.size()) != data_dim(kind_)) throw DataError("dimension mismatch");
  double* g = out.empty() ? nullptr : out.data();
  if (g && static_cast<int>(out.size()) < param_dim(kind_)) throw DomainError("gradient buffer too small");
  switch (kind_) {
    case ModelKind::WN: return wn_eval(psi[0], g);
    case ModelKind::WN2: return wn2_eval(psi[0], psi[1], g);
    case ModelKind::VM: {
      const double d = psi[0] - p_.mu1;
      return vm_eval(std::cos(d), std::sin(d), g);
    }
    default: {
      const double d1 = psi[0] - p_.mu1;
      const double d2 = psi[1] - p_.mu2;
      return biv_eval(std::cos(d1), std::sin(d1), std::cos(d2), std::sin(d2), g);
    }
  }
}

double ComponentDensity::logpdf(const TrigData& t, std::size_t i) const { return logpdf_grad(t, i, {}); }

double ComponentDensity::logpdf_grad(const TrigData& t, std::size_t i, std::span<double> out) const {
  double* g = out.empty() ? nullptr : out.data();
  switch (kind_) {
    case ModelKind::WN: return wn_eval(t.angle(i, 0), g);
    case ModelKind::WN2: return wn2_eval(t.angle(i, 0), t.angle(i, 1), g);
    case ModelKind::VM: {
      const double c = t.cos(i, 0) * cmu1_ + t.sin(i, 0) * smu1_;
      const double s = t.sin(i, 0) * cmu1_ - t.cos(i, 0) * smu1_;
      return vm_eval(c, s, g);
    }
    default: {
      const double c1 = t.cos(i, 0) * cmu1_ + t.sin(i, 0) * smu1_;
      const double s1 = t.sin(i, 0) * cmu1_ - t.cos(i, 0) * smu1_;
      const double c2 = t.cos(i, 1) * cmu2_ + t.sin(i, 1) * smu2_;
      const double s2 = t.sin(i, 1) * cmu2_ - t.cos(i, 1) * smu2_;
      return biv_eval(c1, s1, c2, s2, g);
    }
  }
}

double wnorm_logpdf(double psi, const ComponentParams& p, const DispConfig& d) {
  return ComponentDensity(ModelKind::WN, p, d).logpdf(std::span<const double>(&psi, 1));
}

double wnorm2_logpdf(std::span<const double> psi, const ComponentParams& p, const DispConfig& d) {
  return ComponentDensity(ModelKind::WN2, p, d).logpdf(psi);
}

double vm_logpdf(double psi, const ComponentParams& p) {
  return ComponentDensity(ModelKind::VM, p).logpdf(std::span<const double>(&psi, 1));
}

double vmsin_logpdf(std::span<const double> psi, const ComponentParams& p, const QrndConfig& q) {
  return ComponentDensity(ModelKind::VMSIN, p, {}, q).logpdf(psi);
}

double vmcos_logpdf(std::span<const double> psi, const ComponentParams& p, const QrndConfig& q) {
  return ComponentDensity(ModelKind::VMCOS, p, {}, q).logpdf(psi);
}

double log_density(ModelKind kind, const ComponentParams& p, std::span<const double> psi, const DispConfig& d,
                   const QrndConfig& q) {
  return ComponentDensity(kind, p, d, q).logpdf(psi);
}

std::vector<double> grad_log_density(ModelKind kind, const ComponentParams& p, std::span<const double> psi,
                                     const DispConfig& d, const QrndConfig& q) {
  std::vector<double> g(static_cast<std::size_t>(param_dim(kind)));
  ComponentDensity(kind, p, d, q).logpdf_grad(psi, g);
  return g;
}

MixtureDensity::MixtureDensity(ModelKind kind, const MixtureState& state, const DispConfig& d,
                               const QrndConfig& q) {
  validate_state(state);
  comps_.reserve(state.ncomp());
  for (std::size_t j = 0; j < state.ncomp(); ++j) {
    comps_.emplace_back(kind, state.comps[j], d, q);
    log_pmix_.push_back(std::log(state.pmix[j]));
  }
}

double MixtureDensity::normalize(std::span<double> out) const {
  double hi = kNegInf;
  for (double v : out) hi = std::max(hi, v);
  if (!(hi > kNegInf) || !std::isfinite(hi))
    throw DegenerateError("all component densities vanish at the data point");
  double s = 0.0;
  for (double& v : out) {
    v = std::exp(v - hi);
    s += v;
  }
  for (double& v : out) v /= s;
  return hi + std::log(s);
}

double MixtureDensity::logpdf(std::span<const double> psi) const {
  std::array<double, 64> buf{};
  std::vector<double> big;
  double* l = buf.data();
  if (comps_.size() > buf.size()) {
    big.resize(comps_.size());
    l = big.data();
  }
  for (std::size_t j = 0; j < comps_.size(); ++j) l[j] = log_pmix_[j] + comps_[j].logpdf(psi);
  return log_sum_exp(std::span<const double>(l, comps_.size()));
}

double MixtureDensity::logpdf(const TrigData& t, std::size_t i) const {
  std::array<double, 64> buf{};
  std::vector<double> big;
  double* l = buf.data();
  if (comps_.size() > buf.size()) {
    big.resize(comps_.size());
    l = big.data();
  }
  for (std::size_t j = 0; j < comps_.size(); ++j) l[j] = log_pmix_[j] + comps_[j].logpdf(t, i);
  return log_sum_exp(std::span<const double>(l, comps_.size()));
}

double MixtureDensity::membership(std::span<const double> psi, std::span<double> out) const {
  for (std::size_t j = 0; j < comps_.size(); ++j) out[j] = log_pmix_[j] + comps_[j].logpdf(psi);
  return normalize(out.first(comps_.size()));
}

double MixtureDensity::membership(const TrigData& t, std::size_t i, std::span<double> out) const {
  for (std::size_t j = 0; j < comps_.size(); ++j) out[j] = log_pmix_[j] + comps_[j].logpdf(t, i);
  return normalize(out.first(comps_.size()));
}

double mixture_logpdf(ModelKind kind, const MixtureState& state, std::span<const double> psi,
                      const DispConfig& d, const QrndConfig& q) {
  return MixtureDensity(kind, state, d, q).logpdf(psi);
}

std::vector<double> membership_probs(ModelKind kind, const MixtureState& state, std::span<const double> psi,
                                     const DispConfig& d, const QrndConfig& q) {
  MixtureDensity mix(kind, state, d, q);
  std::vector<double> out(mix.ncomp());
  mix.membership(psi, out);
  return out;
}

}  // namespace torusmix
