#include <array>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "torusmix/densities.hpp"
#include "torusmix/rng.hpp"

using namespace torusmix;

namespace {

constexpr double kPi = std::numbers::pi;

ComponentParams uni(double mu, double kappa) {
  ComponentParams p;
  p.mu1 = mu;
  p.kappa1 = kappa;
  return p;
}

ComponentParams biv(double mu1, double mu2, double k1, double k2, double k3) {
  return ComponentParams{mu1, mu2, k1, k2, k3};
}

double qmc_oracle(bool cosine, double k1, double k2, double k3, std::size_t n) {
  const auto pts = sobol_2d(n);
  double hmax = -1e300;
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = oracle::kTwoPi * pts[i][0], y = oracle::kTwoPi * pts[i][1];
    h[i] = cosine ? oracle::vmcos_exponent(x, y, k1, k2, k3) : oracle::vmsin_exponent(x, y, k1, k2, k3);
    hmax = std::max(hmax, h[i]);
  }
  double s = 0.0;
  for (double v : h) s += std::exp(v - hmax);
  return 4.0 * kPi * kPi * std::exp(hmax) * s / static_cast<double>(n);
}

double normalization(ModelKind kind, const ComponentParams& p, int n) {
  ComponentDensity cd(kind, p);
  if (data_dim(kind) == 1)
    return oracle::integrate_1d([&](double x) { return std::exp(cd.logpdf(std::span<const double>(&x, 1))); }, n);
  return oracle::integrate_2d(
      [&](double x, double y) {
        const std::array<double, 2> psi = {x, y};
        return std::exp(cd.logpdf(psi));
      },
      n);
}

double fd_rel_err(ModelKind kind, const ComponentParams& p, std::span<const double> psi) {
  const auto g = grad_log_density(kind, p, psi);
  double worst = 0.0;
  const double h = 1e-6;
  for (int k = 0; k < param_dim(kind); ++k) {
    ComponentParams a = p, b = p;
    a.set(kind, k, p.get(kind, k) + h);
    b.set(kind, k, p.get(kind, k) - h);
    const double fd = (log_density(kind, a, psi) - log_density(kind, b, psi)) / (2.0 * h);
    worst = std::max(worst, std::abs(g[static_cast<std::size_t>(k)] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("densities") {
  TEST_CASE("wrapped normal univariate") {
    CHECK(wnorm_logpdf(1.3, uni(2.0, 0.0)) == doctest::Approx(-kLogTwoPi).epsilon(1e-15));
    const auto p = uni(2.0, 1.7);
    for (double d : {0.1, 0.9, 2.5, 3.1})
      CHECK(wnorm_logpdf(wrap_angle(2.0 + d), p) == doctest::Approx(wnorm_logpdf(wrap_angle(2.0 - d), p)).epsilon(1e-13));
    const double ref = std::log(oracle::wnorm_direct(kPi, kPi, 1.0, 50));
    CHECK(wnorm_logpdf(kPi, uni(kPi, 1.0)) == doctest::Approx(ref).epsilon(1e-14));
    CHECK(wnorm_logpdf(kPi, uni(kPi, 1.0)) == doctest::Approx(-0.91893852785409677).epsilon(1e-14));
    CHECK(std::exp(ref) == doctest::Approx(0.3989423).epsilon(1e-7));
    CHECK_THROWS_AS(wnorm_logpdf(1.0, uni(0.0, -1.0)), DomainError);
    for (double psi : {0.0, 1.0, 3.0, 6.0})
      CHECK(wnorm_logpdf(psi, uni(0.4, 2.5)) ==
            doctest::Approx(std::log(oracle::wnorm_direct(psi, 0.4, 2.5, 30))).epsilon(1e-12));
  }

  TEST_CASE("wrapped normal bivariate") {
    const std::array<double, 2> psi = {1.1, 5.0};
    const auto p0 = biv(2.0, 4.0, 2.0, 3.0, 0.0);
    CHECK(wnorm2_logpdf(psi, p0) ==
          doctest::Approx(wnorm_logpdf(1.1, uni(2.0, 2.0)) + wnorm_logpdf(5.0, uni(4.0, 3.0))).epsilon(1e-13));
    CHECK(wnorm2_logpdf(psi, biv(1, 1, 0, 0, 0)) == doctest::Approx(-2.0 * kLogTwoPi).epsilon(1e-15));
    CHECK_THROWS_AS(wnorm2_logpdf(psi, biv(1, 1, 1, 1, 2)), ConstraintError);
    const auto p = biv(1.0, 5.5, 2.0, 3.0, 1.0);
    CHECK(wnorm2_logpdf(psi, p) ==
          doctest::Approx(std::log(oracle::wnorm2_direct(1.1, 5.0, 1.0, 5.5, 2.0, 3.0, 1.0, 20))).epsilon(1e-12));
    CHECK(normalization(ModelKind::WN2, p, 512) == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("von Mises univariate") {
    CHECK(vm_logpdf(0.7, uni(3.0, 0.0)) == doctest::Approx(-kLogTwoPi).epsilon(1e-15));
    const auto p = uni(1.0, 3.0);
    CHECK(vm_logpdf(1.5, p) == doctest::Approx(vm_logpdf(0.5, p)).epsilon(1e-14));
    const double i0 = static_cast<double>(oracle::bessel_series(0, 1.0));
    CHECK(vm_logpdf(2.0, uni(2.0, 1.0)) == doctest::Approx(std::log(std::exp(1.0) / (oracle::kTwoPi * i0))).epsilon(1e-14));
    CHECK(vm_logpdf(2.0, uni(2.0, 1.0)) == doctest::Approx(-1.0737914249165241323).epsilon(1e-14));
    CHECK(normalization(ModelKind::VM, uni(4.0, 30.0), 1 << 16) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("sine model constant") {
    const double i0a = static_cast<double>(oracle::bessel_series(0, 1.5));
    const double i0b = static_cast<double>(oracle::bessel_series(0, 2.5));
    CHECK(vmsin_const(1.5, 2.5, 0.0) == doctest::Approx(4 * kPi * kPi * i0a * i0b).epsilon(1e-13));
    CHECK(vmsin_const(0, 0, 0) == doctest::Approx(4 * kPi * kPi).epsilon(1e-15));
    CHECK(vmsin_const(1, 1, 2) == doctest::Approx(93.274443998134582847).epsilon(1e-11));
    CHECK(vmsin_const(1, 1, 2) == doctest::Approx(qmc_oracle(false, 1, 1, 2, 1000000)).epsilon(1e-3));
    // kappa1 = 0 uses the analytic small-argument limit.
    const double ref0 = oracle::integrate_2d(
        [](double x, double y) { return std::exp(oracle::vmsin_exponent(x, y, 0.0, 2.0, 1.5)); }, 256);
    CHECK(vmsin_const(0.0, 2.0, 1.5) == doctest::Approx(ref0).epsilon(1e-12));
    CHECK_THROWS_AS(vmsin_const(-1, 1, 0), DomainError);
    const auto s = vmsin_constant(3, 4, 2, {}, ConstMethod::Series);
    const auto q = vmsin_constant(3, 4, 2, {1 << 20}, ConstMethod::Qmc);
    CHECK_FALSE(s.used_qmc);
    CHECK(q.used_qmc);
    CHECK(std::exp(s.log_c - q.log_c) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(s.d3 == doctest::Approx(q.d3).epsilon(1e-3));
    CHECK(s.d12 == doctest::Approx(q.d12).epsilon(1e-3));
  }

  TEST_CASE("cosine model constant") {
    const double i0a = static_cast<double>(oracle::bessel_series(0, 1.5));
    const double i0b = static_cast<double>(oracle::bessel_series(0, 2.5));
    CHECK(vmcos_const(1.5, 2.5, 0.0) == doctest::Approx(4 * kPi * kPi * i0a * i0b).epsilon(1e-13));
    CHECK(vmcos_const(0, 0, 0) == doctest::Approx(4 * kPi * kPi).epsilon(1e-15));
    CHECK(vmcos_const(1, 1, -2) == doctest::Approx(105.13370655037475851).epsilon(1e-11));
    CHECK(vmcos_const(1, 1, -2) == doctest::Approx(qmc_oracle(true, 1, 1, -2, 1000000)).epsilon(1e-3));
    CHECK_FALSE(vmcos_uses_qmc(50, 50, -5));
    CHECK(vmcos_uses_qmc(1, 1, -5.01));
    CHECK(vmcos_uses_qmc(50.5, 1, 0));
    for (auto k : {std::array<double, 3>{0.5, 3.0, -4.0}, {10, 20, 5}, {30, 2, -1}, {45, 45, 3}}) {
      const auto s = vmcos_constant(k[0], k[1], k[2], {}, ConstMethod::Series);
      const auto q = vmcos_constant(k[0], k[1], k[2], {1 << 20}, ConstMethod::Qmc);
      CHECK(std::exp(s.log_c - q.log_c) == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  TEST_CASE("bivariate von Mises densities factorize and normalize") {
    const std::array<double, 2> psi = {0.4, 2.9};
    for (ModelKind kind : {ModelKind::VMSIN, ModelKind::VMCOS}) {
      const auto p = biv(1.0, 3.0, 2.0, 0.7, 0.0);
      CHECK(log_density(kind, p, psi) ==
            doctest::Approx(vm_logpdf(0.4, uni(1.0, 2.0)) + vm_logpdf(2.9, uni(3.0, 0.7))).epsilon(1e-13));
      CHECK(log_density(kind, biv(1, 2, 0, 0, 0), psi) == doctest::Approx(-2.0 * kLogTwoPi).epsilon(1e-14));
    }
    CHECK(normalization(ModelKind::VMSIN, biv(2.0, 4.0, 1, 1, 2), 512) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(normalization(ModelKind::VMCOS, biv(2.0, 4.0, 1, 1, -1), 512) == doctest::Approx(1.0).epsilon(1e-4));
    // Sine model mirror symmetry.
    const auto p = biv(1.0, 2.0, 1.3, 0.8, 1.7);
    auto q = p;
    q.kappa3 = -p.kappa3;
    for (double a : {0.3, 1.9, 4.4}) {
      for (double b : {0.1, 3.3}) {
        const std::array<double, 2> x = {a, b};
        const std::array<double, 2> y = {wrap_angle(2.0 * p.mu1 - a), b};
        CHECK(log_density(ModelKind::VMSIN, p, x) == doctest::Approx(log_density(ModelKind::VMSIN, q, y)).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("gradients at trivial points") {
    const double mu = 1.2;
    CHECK(grad_log_density(ModelKind::VM, uni(mu, 2.0), std::span<const double>(&mu, 1))[1] == 0.0);
    const std::array<double, 2> at_mean = {1.0, 2.0};
    const auto g = grad_log_density(ModelKind::VMSIN, biv(1.0, 2.0, 1.5, 2.5, 0.0), at_mean);
    CHECK(g[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }

  TEST_CASE("gradients agree with central finite differences") {
    RngStream rng(99, 0);
    for (ModelKind kind : {ModelKind::WN, ModelKind::VM, ModelKind::WN2, ModelKind::VMSIN, ModelKind::VMCOS}) {
      double worst = 0.0;
      for (int t = 0; t < 30; ++t) {
        ComponentParams p;
        p.mu1 = rng.uniform(0, oracle::kTwoPi);
        p.mu2 = rng.uniform(0, oracle::kTwoPi);
        p.kappa1 = std::exp(rng.uniform(std::log(0.3), std::log(20.0)));
        p.kappa2 = std::exp(rng.uniform(std::log(0.3), std::log(20.0)));
        p.kappa3 = kind == ModelKind::WN2 ? rng.uniform(-0.9, 0.9) * std::sqrt(p.kappa1 * p.kappa2)
                                          : rng.uniform(-8.0, 8.0);
        const std::array<double, 2> psi = {rng.uniform(0, oracle::kTwoPi), rng.uniform(0, oracle::kTwoPi)};
        worst = std::max(worst, fd_rel_err(kind, p, std::span<const double>(psi.data(), data_dim(kind))));
      }
      INFO(to_string(kind));
      CHECK(worst < 1e-5);
    }
  }

  TEST_CASE("cached-trig evaluation matches direct evaluation") {
    AngleData data(2, {0.3, 5.9, 2.2, 1.0, 6.1, 3.3});
    TrigData t(data);
    for (ModelKind kind : {ModelKind::WN2, ModelKind::VMSIN, ModelKind::VMCOS}) {
      ComponentDensity cd(kind, biv(4.0, 0.5, 2.0, 1.0, 0.5));
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::array<double, 5> g1{}, g2{};
        const double a = cd.logpdf_grad(data[i], g1);
        const double b = cd.logpdf_grad(t, i, g2);
        CHECK(a == doctest::Approx(b).epsilon(1e-13));
        for (int k = 0; k < 5; ++k) CHECK(g1[k] == doctest::Approx(g2[k]).epsilon(1e-12).scale(1.0));
      }
    }
  }

  TEST_CASE("mixture density and membership") {
    const std::array<double, 2> psi = {1.0, 2.5};
    MixtureState one{{biv(1, 2, 2, 3, 0.5)}, {1.0}};
    CHECK(mixture_logpdf(ModelKind::VMSIN, one, psi) ==
          doctest::Approx(log_density(ModelKind::VMSIN, one.comps[0], psi)).epsilon(1e-15));
    CHECK(membership_probs(ModelKind::VMSIN, one, psi) == std::vector<double>{1.0});

    MixtureState same{{biv(1, 2, 2, 3, 0.5), biv(1, 2, 2, 3, 0.5)}, {0.3, 0.7}};
    CHECK(mixture_logpdf(ModelKind::VMCOS, same, psi) ==
          doctest::Approx(log_density(ModelKind::VMCOS, same.comps[0], psi)).epsilon(1e-14));
    const auto pr = membership_probs(ModelKind::VMCOS, same, psi);
    CHECK(pr[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(pr[1] == doctest::Approx(0.7).epsilon(1e-14));

    MixtureState three{{biv(1, 2, 2, 3, 0.5), biv(4, 4, 1, 5, -2), biv(0.2, 5, 7, 1, 1)}, {0.2, 0.5, 0.3}};
    double direct = 0.0;
    for (int j = 0; j < 3; ++j) direct += three.pmix[j] * std::exp(log_density(ModelKind::WN2, three.comps[j], psi));
    CHECK(std::exp(mixture_logpdf(ModelKind::WN2, three, psi)) == doctest::Approx(direct).epsilon(1e-12));

    MixtureState wn{{uni(1.0, 3.0), uni(4.0, 1.5)}, {0.4, 0.6}};
    const double x = 2.3;
    const double f0 = 0.4 * std::exp(wnorm_logpdf(x, wn.comps[0]));
    const double f1 = 0.6 * std::exp(wnorm_logpdf(x, wn.comps[1]));
    const auto m = membership_probs(ModelKind::WN, wn, std::span<const double>(&x, 1));
    CHECK(m[0] == doctest::Approx(f0 / (f0 + f1)).epsilon(1e-12));
    CHECK(m[0] + m[1] == doctest::Approx(1.0).epsilon(1e-12));

    MixtureState bad = wn;
    bad.pmix = {0.4, 0.5};
    CHECK_THROWS_AS(mixture_logpdf(ModelKind::WN, bad, std::span<const double>(&x, 1)), DomainError);
  }

  TEST_CASE("membership stays finite when every density underflows") {
    // Both components are far from the point: log densities near -2e4.
    MixtureState s{{uni(0.0, 1e4), uni(0.2, 1e4)}, {0.5, 0.5}};
    const double x = kPi;
    const auto m = membership_probs(ModelKind::VM, s, std::span<const double>(&x, 1));
    const double l0 = vm_logpdf(x, s.comps[0]);
    const double l1 = vm_logpdf(x, s.comps[1]);
    CHECK(l0 < -1e4);
    CHECK(m[0] == doctest::Approx(1.0 / (1.0 + std::exp(l1 - l0))).epsilon(1e-12));
    // A degenerate wrapped normal (singular precision) has zero density everywhere.
    MixtureState dead{{biv(1, 1, 1, 1, 1)}, {1.0}};
    const std::array<double, 2> psi = {0.5, 0.5};
    CHECK_THROWS_AS(membership_probs(ModelKind::WN2, dead, psi), DegenerateError);
  }

  TEST_CASE("mode counts follow the unimodality rules") {
    const int n = 200;
    auto modes = [&](ModelKind kind, const ComponentParams& p) {
      std::vector<double> v(static_cast<std::size_t>(n * n));
      ComponentDensity cd(kind, p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const std::array<double, 2> psi = {oracle::kTwoPi * i / n, oracle::kTwoPi * j / n};
          v[static_cast<std::size_t>(i * n + j)] = cd.logpdf(psi);
        }
      return oracle::count_modes(v, n);
    };
    CHECK(modes(ModelKind::VMSIN, biv(1, 2, 2, 2, 1)) == 1);
    CHECK(modes(ModelKind::VMSIN, biv(1, 2, 2, 2, 3)) == 2);
    CHECK(modes(ModelKind::VMCOS, biv(1, 2, 2, 2, -0.5)) == 1);
    CHECK(modes(ModelKind::VMCOS, biv(1, 2, 2, 2, -2)) == 2);
  }
}
