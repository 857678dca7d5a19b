#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "gof.hpp"
#include "torusmix/postprocess.hpp"
#include "torusmix/sampling.hpp"

using namespace torusmix;

namespace {

ComponentParams vm(double mu, double kappa) {
  ComponentParams p;
  p.mu1 = mu;
  p.kappa1 = kappa;
  return p;
}

// Hand-built single-chain VM fit with one component per draw.
FitResult synthetic_fit(const std::vector<double>& kappas, const std::vector<double>& mus) {
  FitResult f;
  f.config.model = ModelKind::VM;
  f.config.ncomp = 1;
  f.data = AngleData(1, {0.1, 0.2, 0.3});
  ChainSamples ch;
  ch.chain_id = 1;
  for (std::size_t t = 0; t < kappas.size(); ++t) {
    Draw d;
    d.iteration = static_cast<int>(t + 1);
    d.state.comps = {vm(mus[t], kappas[t])};
    d.state.pmix = {1.0};
    d.lpd = -static_cast<double>(t);
    d.accepted = {1};
    ch.draws.push_back(d);
  }
  f.chains.push_back(ch);
  return f;
}

FitResult indexed_fit(int chains, int draws) {
  FitResult f;
  f.config.model = ModelKind::VM;
  f.config.ncomp = 1;
  f.data = AngleData(1, {0.1});
  for (int c = 1; c <= chains; ++c) {
    ChainSamples ch;
    ch.chain_id = c;
    for (int t = 1; t <= draws; ++t) {
      Draw d;
      d.iteration = t;
      d.state.comps = {vm(0.0, 1.0)};
      d.state.pmix = {1.0};
      ch.draws.push_back(d);
    }
    f.chains.push_back(ch);
  }
  return f;
}

struct Separated {
  AngleData data;
  std::vector<int> truth;  // 1-based
  FitResult fit;
};

// Three well-separated von Mises clusters, fitted with two chains.
const Separated& separated() {
  static const Separated s = [] {
    Separated r;
    MixtureState truth;
    truth.comps = {vm(0.5, 12.0), vm(2.6, 12.0), vm(4.7, 12.0)};
    truth.pmix = {0.3, 0.3, 0.4};
    RngStream rng(77, 0);
    auto draw = rmix(300, ModelKind::VM, truth, rng);
    r.data = draw.data;
    for (int l : draw.labels) r.truth.push_back(l + 1);
    FitConfig c;
    c.model = ModelKind::VM;
    c.ncomp = 3;
    c.n_iter = 600;
    c.n_chains = 2;
    c.seed = 11;
    r.fit = fit_angmix(c, r.data);
    return r;
  }();
  return s;
}

bool same_state(const MixtureState& a, const MixtureState& b) {
  return a.comps == b.comps && a.pmix == b.pmix;
}

std::vector<std::pair<std::vector<double>, double>> component_multiset(const MixtureState& s) {
  std::vector<std::pair<std::vector<double>, double>> out;
  for (std::size_t j = 0; j < s.ncomp(); ++j)
    out.push_back({{s.comps[j].mu1, s.comps[j].kappa1}, s.pmix[j]});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("postprocess") {
  TEST_CASE("add_burnin_thin index arithmetic") {
    const auto f = indexed_fit(2, 1000);
    const auto same = add_burnin_thin(f, 0.0, 1);
    REQUIRE(same.chains[0].draws.size() == 1000);
    CHECK(same.chains[1].draws.front().iteration == 1);

    const auto half = add_burnin_thin(indexed_fit(1, 999), 0.5, 1);
    CHECK(half.chains[0].draws.size() == 500);
    CHECK(half.chains[0].draws.front().iteration == 500);

    const auto thin = add_burnin_thin(f, 0.25, 4);
    REQUIRE(thin.chains[0].draws.size() == 188);
    for (std::size_t i = 0; i < 188; ++i) CHECK(thin.chains[0].draws[i].iteration == static_cast<int>(251 + 4 * i));

    CHECK(add_burnin_thin(indexed_fit(1, 3), 0.99, 1).chains[0].draws.size() == 1);
    CHECK_THROWS_AS(add_burnin_thin(f, 1.0, 1), DomainError);
    CHECK_THROWS_AS(add_burnin_thin(f, 0.1, 0), DomainError);
  }

  TEST_CASE("select_chains") {
    const auto f = indexed_fit(3, 5);
    const std::vector<int> all = {1, 2, 3}, one = {2}, bad = {4}, dup = {1, 1};
    CHECK(select_chains(f, all).chains.size() == 3);
    const auto s = select_chains(f, one);
    REQUIRE(s.chains.size() == 1);
    CHECK(s.chains[0].chain_id == 2);
    CHECK_THROWS_AS(select_chains(f, bad), DomainError);
    CHECK_THROWS_AS(select_chains(f, dup), DomainError);
    CHECK_THROWS_AS(select_chains(f, std::vector<int>{}), DomainError);
  }

  TEST_CASE("hungarian matches brute force") {
    RngStream rng(3, 0);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t k = 1 + rep % 5;
      std::vector<double> cost(k * k);
      for (double& c : cost) c = rng.uniform() * 10.0;
      const auto col = hungarian(cost, k);
      double got = 0.0;
      for (std::size_t i = 0; i < k; ++i) got += cost[i * k + static_cast<std::size_t>(col[i])];
      std::vector<int> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += cost[i * k + static_cast<std::size_t>(perm[i])];
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(got == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("fix_label fixed point, invariance and inject-and-recover") {
    const auto& s = separated();
    const auto base = fix_label(s.fit);
    RelabelReport again;
    const auto fixed = fix_label(base, &again);
    CHECK(again.converged);
    for (const auto& chain : again.perms)
      for (const auto& perm : chain) CHECK(perm == std::vector<int>{0, 1, 2});

    // Only labels change.
    for (std::size_t c = 0; c < base.chains.size(); ++c)
      for (std::size_t t = 0; t < base.chains[c].draws.size(); ++t) {
        const auto& a = s.fit.chains[c].draws[t];
        const auto& b = base.chains[c].draws[t];
        CHECK(component_multiset(a.state) == component_multiset(b.state));
        for (double x : {0.4, 2.0, 5.5}) {
          const double v = x;
          CHECK(mixture_logpdf(ModelKind::VM, a.state, {&v, 1}) ==
                doctest::Approx(mixture_logpdf(ModelKind::VM, b.state, {&v, 1})).epsilon(1e-12));
        }
      }

    // Permute known draws, leaving chain 1's first draw untouched.
    FitResult injected = base;
    RngStream rng(5, 0);
    std::map<std::pair<std::size_t, std::size_t>, bool> touched;
    for (std::size_t c = 0; c < injected.chains.size(); ++c)
      for (std::size_t t = 0; t < injected.chains[c].draws.size(); ++t) {
        if ((c == 0 && t == 0) || t % 3 != 1) continue;
        std::vector<int> perm = {0, 1, 2};
        while (perm == std::vector<int>{0, 1, 2}) {
          for (std::size_t i = 2; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_index(i + 1))]);
        }
        auto& d = injected.chains[c].draws[t];
        apply_permutation(d.state, d.labels, perm);
        touched[{c, t}] = true;
      }
    REQUIRE(touched.size() > 100);
    const auto recovered = fix_label(injected);
    for (std::size_t c = 0; c < base.chains.size(); ++c)
      for (std::size_t t = 0; t < base.chains[c].draws.size(); ++t) {
        CHECK(same_state(recovered.chains[c].draws[t].state, base.chains[c].draws[t].state));
        CHECK(recovered.chains[c].draws[t].labels == base.chains[c].draws[t].labels);
      }

    // Point estimates.
    const auto m0 = pointest(base, Reducer::MEAN), m1 = pointest(recovered, Reducer::MEAN);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(m0.comps[j].mu1 - m1.comps[j].mu1) < 1e-12);
      CHECK(std::abs(m0.comps[j].kappa1 - m1.comps[j].kappa1) < 1e-12);
      CHECK(std::abs(m0.pmix[j] - m1.pmix[j]) < 1e-12);
    }
    CHECK(component_multiset(pointest(s.fit, Reducer::MODE)) == component_multiset(pointest(base, Reducer::MODE)));
    CHECK(component_multiset(pointest(injected, Reducer::MODE)) == component_multiset(pointest(base, Reducer::MODE)));
  }

  TEST_CASE("fix_label with one component is the identity") {
    const auto f = synthetic_fit({1.0, 2.0}, {0.0, 1.0});
    RelabelReport rep;
    const auto g = fix_label(f, &rep);
    CHECK(same_state(g.chains[0].draws[1].state, f.chains[0].draws[1].state));
    CHECK(rep.perms[0][1] == std::vector<int>{0});
  }

  TEST_CASE("pointest") {
    const auto one = synthetic_fit({2.5}, {1.0});
    CHECK(same_state(pointest(one, Reducer::MEAN), one.chains[0].draws[0].state));
    CHECK(same_state(pointest(one, Reducer::MODE), one.chains[0].draws[0].state));

    const auto two = synthetic_fit({1.0, 4.0}, {6.2, 0.2});
    const auto m = pointest(two, Reducer::MEAN);
    CHECK(m.comps[0].kappa1 == doctest::Approx(2.5).epsilon(1e-14));
    const double expect = std::atan2(std::sin(6.2) + std::sin(0.2), std::cos(6.2) + std::cos(0.2));
    CHECK(m.comps[0].mu1 == doctest::Approx(wrap_angle(expect)).epsilon(1e-14));
    CHECK(m.pmix[0] == 1.0);
    // Recorded lpd decreases with the draw index.
    CHECK(same_state(pointest(two, Reducer::MODE), two.chains[0].draws[0].state));

    const auto med = pointest(synthetic_fit({1.0, 3.0, 8.0}, {0.1, 0.2, 0.3}), [](std::span<const double> v) {
      std::vector<double> x(v.begin(), v.end());
      std::sort(x.begin(), x.end());
      return x[x.size() / 2];
    });
    CHECK(med.comps[0].kappa1 == 3.0);
    CHECK(med.comps[0].mu1 == 0.2);

    FitResult empty = two;
    empty.chains[0].draws.clear();
    CHECK_THROWS_AS(pointest(empty), DomainError);
    CHECK(parse_reducer("mode") == Reducer::MODE);
    CHECK_THROWS_AS(parse_reducer("median"), ConfigError);
  }

  TEST_CASE("quantiles and credible intervals") {
    std::vector<double> k(101), mu(101, 1.0);
    std::iota(k.begin(), k.end(), 1.0);
    RngStream rng(2, 0);
    for (std::size_t i = 100; i > 0; --i) std::swap(k[i], k[static_cast<std::size_t>(rng.uniform_index(i + 1))]);
    const auto f = synthetic_fit(k, mu);
    const std::vector<double> probs = {0.0, 0.025, 0.5, 0.975, 1.0, 0.333};
    const auto q = quantiles(f, probs);
    REQUIRE(q.size() == 3);
    CHECK(q[0].parameter == "kappa");
    CHECK(q[0].component == 1);
    const std::vector<double> expect = {1.0, 3.5, 51.0, 98.5, 101.0, 1.0 + 33.3};
    for (std::size_t i = 0; i < probs.size(); ++i) CHECK(q[0].values[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    // Constant chain: degenerate interval.
    const auto ci = credible_interval(f);
    CHECK(ci[1].parameter == "mu");
    CHECK(ci[1].lower == ci[1].upper);
    CHECK(ci[2].lower == 1.0);
    CHECK(ci[0].lower == doctest::Approx(3.5));
    CHECK_THROWS_AS(credible_interval(f, 0.0), DomainError);

    // Mean draws straddling zero are unwrapped around their circular mean.
    const auto wrapf = synthetic_fit({1.0, 1.0, 1.0}, {6.1, 0.0, 0.2});
    const auto w = credible_interval(wrapf, 0.5);
    CHECK(w[1].lower < 0.0);
    CHECK(w[1].upper > 0.0);
    CHECK(w[1].lower <= w[1].upper);
  }

  TEST_CASE("credible intervals bracket the posterior mean") {
    RngStream rng(8, 0);
    const auto x = rvm(200, vm(1.5, 4.0), rng);
    FitConfig c;
    c.ncomp = 1;
    c.n_iter = 2000;
    c.n_chains = 1;
    const auto fit = fit_angmix(c, AngleData(1, x));
    const auto m = pointest(fit);
    const auto ci = credible_interval(fit);
    CHECK(ci[0].lower <= m.comps[0].kappa1);
    CHECK(m.comps[0].kappa1 <= ci[0].upper);
    CHECK(ci[1].lower <= m.comps[0].mu1);
    CHECK(m.comps[0].mu1 <= ci[1].upper);
    CHECK(max_loglik(fit) >= fit.chains[0].draws.back().loglik);
    const auto& d = fit.chains[0].draws[17];
    CHECK(loglik_at(fit, d.state) == doctest::Approx(d.loglik).epsilon(1e-10));
  }

  TEST_CASE("latent allocation") {
    const auto& s = separated();
    const auto fixed = fix_label(s.fit);
    const auto labels = latent_allocation(fixed);
    REQUIRE(labels.size() == s.truth.size());
    std::vector<int> perm = {1, 2, 3};
    double best = 0.0;
    do {
      std::size_t agree = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        agree += perm[static_cast<std::size_t>(labels[i] - 1)] == s.truth[i];
      best = std::max(best, static_cast<double>(agree) / static_cast<double>(labels.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(best >= 0.98);

    const auto single = latent_allocation(synthetic_fit({2.0}, {1.0}));
    CHECK(std::all_of(single.begin(), single.end(), [](int l) { return l == 1; }));

    FitResult tie = synthetic_fit({2.0}, {1.0});
    tie.config.ncomp = 2;
    auto& st = tie.chains[0].draws[0].state;
    st.comps = {vm(1.0, 2.0), vm(1.0, 2.0)};
    st.pmix = {0.5, 0.5};
    const auto tl = latent_allocation(tie);
    CHECK(std::all_of(tl.begin(), tl.end(), [](int l) { return l == 1; }));
  }

  TEST_CASE("fitted density and draws") {
    FitResult f = synthetic_fit({3.0}, {2.0});
    f.config.ncomp = 2;
    auto& st = f.chains[0].draws[0].state;
    st.comps = {vm(2.0, 3.0), vm(5.0, 8.0)};
    st.pmix = {0.6, 0.4};
    for (double x : {0.0, 1.0, 4.9}) {
      const double v = x;
      CHECK(d_fitted({&v, 1}, f) == mixture_logpdf(ModelKind::VM, st, {&v, 1}));
    }
    RngStream a(9, 1), b(9, 1);
    const auto ra = r_fitted(50, f, Reducer::MEAN, a), rb = r_fitted(50, f, Reducer::MEAN, b);
    CHECK(ra.data.values() == rb.data.values());

    RngStream rng(10, 0);
    const auto big = r_fitted(100000, f, Reducer::MODE, rng);
    const int bins = 36;
    const auto probs = gof::bin_probs_1d([&](double x) { return std::exp(d_fitted({&x, 1}, f, Reducer::MODE)); }, bins, 20);
    std::vector<double> freq(bins, 0.0);
    for (double x : big.data.values()) freq[static_cast<std::size_t>(gof::bin_of(x, bins))] += 1e-5;
    double tv = 0.0;
    for (int i = 0; i < bins; ++i) tv += 0.5 * std::abs(freq[static_cast<std::size_t>(i)] - probs[static_cast<std::size_t>(i)]);
    CHECK(tv < 0.03);
  }
}
