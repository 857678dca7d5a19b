#include "torusmix/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "torusmix/densities.hpp"

namespace torusmix {

namespace {

constexpr double kZeroResultant = 1e-12;
constexpr double kZeroSpread = 1e-20;

void check_range(CircSummary& s) {
  auto clamp_check = [](double& v, double lo, double hi) {
    if (std::isnan(v)) return;
    if (v < lo - 1e-9 || v > hi + 1e-9) throw NumericError("summary statistic out of range");
    v = std::clamp(v, lo, hi);
  };
  clamp_check(s.var1, 0.0, 1.0);
  clamp_check(s.var2, 0.0, 1.0);
  clamp_check(s.rho_js, -1.0, 1.0);
  clamp_check(s.rho_fl, -1.0, 1.0);
}

double log_sinh(double x) { return x + std::log(-std::expm1(-2.0 * x)) - std::numbers::ln2; }

// sinh(c) / sqrt(sinh(a) sinh(b)) for a, b > 0 without overflow.
double sinh_ratio(double c, double a, double b) {
  if (c == 0.0) return 0.0;
  const double r = std::exp(log_sinh(std::abs(c)) - 0.5 * (log_sinh(a) + log_sinh(b)));
  return c < 0.0 ? -r : r;
}

void check_pairs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("correlation needs equal-length samples");
  if (a.size() < 3) throw DegenerateError("correlation needs at least 3 pairs");
}

}  // namespace

double circ_mean(std::span<const double> sample) {
  if (sample.empty()) throw DegenerateError("circular mean of an empty sample");
  double c = 0.0, s = 0.0;
  for (double x : sample) {
    c += std::cos(x);
    s += std::sin(x);
  }
  const double n = static_cast<double>(sample.size());
  if (std::hypot(c, s) / n < kZeroResultant) throw DegenerateError("circular mean undefined: zero resultant");
  return wrap_angle(std::atan2(s, c));
}

double circ_var(std::span<const double> sample, bool* zero_resultant) {
  if (sample.empty()) throw DegenerateError("circular variance of an empty sample");
  double c = 0.0, s = 0.0;
  for (double x : sample) {
    c += std::cos(x);
    s += std::sin(x);
  }
  const double rbar = std::hypot(c, s) / static_cast<double>(sample.size());
  const bool zero = rbar < kZeroResultant;
  if (zero_resultant) *zero_resultant = zero;
  if (zero) return 1.0;
  return std::clamp(1.0 - rbar, 0.0, 1.0);
}

double circ_corr_js(std::span<const double> a, std::span<const double> b) {
  check_pairs(a, b);
  const double ma = circ_mean(a), mb = circ_mean(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sa = std::sin(a[i] - ma), sb = std::sin(b[i] - mb);
    num += sa * sb;
    da += sa * sa;
    db += sb * sb;
  }
  const double n = static_cast<double>(a.size());
  if (!(da > kZeroSpread * n) || !(db > kZeroSpread * n))
    throw DegenerateError("JS correlation undefined: zero denominator");
  return std::clamp(num / std::sqrt(da * db), -1.0, 1.0);
}

double circ_corr_fl(std::span<const double> a, std::span<const double> b) {
  check_pairs(a, b);
  // sum_{i,j} sin(a_i - a_j) sin(b_i - b_j) = 2 (P Q - R T), and
  // sum_{i,j} sin^2(a_i - a_j) = 2 (S_aa C_aa - X_a^2).
  double p = 0, q = 0, r = 0, t = 0, ssa = 0, cca = 0, sca = 0, ssb = 0, ccb = 0, scb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sa = std::sin(a[i]), ca = std::cos(a[i]), sb = std::sin(b[i]), cb = std::cos(b[i]);
    p += sa * sb;
    q += ca * cb;
    r += sa * cb;
    t += ca * sb;
    ssa += sa * sa;
    cca += ca * ca;
    sca += sa * ca;
    ssb += sb * sb;
    ccb += cb * cb;
    scb += sb * cb;
  }
  const double n2 = static_cast<double>(a.size()) * static_cast<double>(a.size());
  const double va = ssa * cca - sca * sca, vb = ssb * ccb - scb * scb;
  if (!(va > 1e-12 * n2) || !(vb > 1e-12 * n2)) throw DegenerateError("FL correlation undefined: zero denominator");
  return std::clamp((p * q - r * t) / std::sqrt(va * vb), -1.0, 1.0);
}

CircSummary sample_summary(const AngleData& data) {
  CircSummary s;
  const auto a = data.column(0);
  s.var1 = circ_var(a);
  if (data.dim() == 2) {
    const auto b = data.column(1);
    s.var2 = circ_var(b);
    s.rho_js = circ_corr_js(a, b);
    s.rho_fl = circ_corr_fl(a, b);
  }
  return s;
}

CircSummary model_summary(ModelKind kind, const ComponentParams& p, const QrndConfig& q) {
  validate_params(kind, p);
  CircSummary s;
  switch (kind) {
    case ModelKind::WN:
      s.var1 = p.kappa1 == 0.0 ? 1.0 : -std::expm1(-0.5 / p.kappa1);
      break;
    case ModelKind::VM:
      s.var1 = 1.0 - bessel_i_ratio(p.kappa1);
      break;
    case ModelKind::WN2: {
      if (p.kappa1 == 0.0 && p.kappa2 == 0.0 && p.kappa3 == 0.0) {
        s.var1 = s.var2 = 1.0;
        s.rho_js = s.rho_fl = 0.0;
        break;
      }
      const double det = p.kappa1 * p.kappa2 - p.kappa3 * p.kappa3;
      if (!(det > 0.0)) throw DomainError("wnorm2 summary needs a non-singular precision matrix");
      const double s11 = p.kappa2 / det, s22 = p.kappa1 / det, s12 = -p.kappa3 / det;
      s.var1 = -std::expm1(-0.5 * s11);
      s.var2 = -std::expm1(-0.5 * s22);
      s.rho_js = sinh_ratio(s12, s11, s22);
      s.rho_fl = sinh_ratio(2.0 * s12, 2.0 * s11, 2.0 * s22);
      break;
    }
    case ModelKind::VMSIN:
    case ModelKind::VMCOS: {
      const bool cosine = kind == ModelKind::VMCOS;
      const auto c = cosine ? vmcos_constant(p.kappa1, p.kappa2, p.kappa3, q)
                            : vmsin_constant(p.kappa1, p.kappa2, p.kappa3, q);
      s.var1 = 1.0 - c.d1;
      s.var2 = 1.0 - c.d2;
      const double num = cosine ? c.d3 - c.d12 : c.d3;
      const double js_den = std::sqrt((1.0 - c.d11) * (1.0 - c.d22));
      const double fl_den = std::sqrt(c.d11 * (1.0 - c.d11) * c.d22 * (1.0 - c.d22));
      s.rho_js = js_den > 0.0 ? num / js_den : 0.0;
      s.rho_fl = fl_den > 0.0 ? num * c.d12 / fl_den : 0.0;
      break;
    }
  }
  check_range(s);
  return s;
}

}  // namespace torusmix
