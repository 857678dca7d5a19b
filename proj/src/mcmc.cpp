#include "torusmix/mcmc.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace torusmix {

namespace {

double normal_logpdf(double x, double var) { return -0.5 * (std::log(kTwoPi * var) + x * x / var); }

bool bivariate(ModelKind kind) { return data_dim(kind) == 2; }

}  // namespace

std::string_view to_string(Method m) { return m == Method::HMC ? "hmc" : "rwmh"; }

std::string_view to_string(CovRestrict c) {
  switch (c) {
    case CovRestrict::NONE: return "none";
    case CovRestrict::ZERO: return "zero";
    case CovRestrict::POSITIVE: return "positive";
    case CovRestrict::NEGATIVE: return "negative";
  }
  return "none";
}

Method parse_method(std::string_view name) {
  if (name == "hmc" || name == "HMC") return Method::HMC;
  if (name == "rwmh" || name == "RWMH") return Method::RWMH;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

CovRestrict parse_cov_restrict(std::string_view name) {
  if (name == "none" || name == "NONE") return CovRestrict::NONE;
  if (name == "zero" || name == "ZERO") return CovRestrict::ZERO;
  if (name == "positive" || name == "POSITIVE") return CovRestrict::POSITIVE;
  if (name == "negative" || name == "NEGATIVE") return CovRestrict::NEGATIVE;
  throw ConfigError("unknown cov-restrict '" + std::string(name) + "'");
}

std::vector<double> PriorSpec::alpha(ModelKind kind, std::size_t ncomp) const {
  if (pmix_alpha.empty()) return std::vector<double>(ncomp, bivariate(kind) ? 5.5 : 4.0);
  if (pmix_alpha.size() == 1) return std::vector<double>(ncomp, pmix_alpha[0]);
  if (pmix_alpha.size() != ncomp) throw ConfigError("pmix alpha must have one entry or one per component");
  return pmix_alpha;
}

double log_prior(ModelKind kind, const ComponentParams& p, const PriorSpec& spec, const Support& s) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const double var = spec.norm_var;
  if (!(p.kappa1 > 0.0) || !std::isfinite(p.kappa1)) return kNegInf;
  if (!bivariate(kind)) return normal_logpdf(std::log(p.kappa1), var);
  if (!(p.kappa2 > 0.0) || !std::isfinite(p.kappa2) || !std::isfinite(p.kappa3)) return kNegInf;
  switch (s.cov_restrict) {
    case CovRestrict::NONE: break;
    case CovRestrict::ZERO:
      if (p.kappa3 != 0.0) return kNegInf;
      break;
    case CovRestrict::POSITIVE:
      if (p.kappa3 < 0.0) return kNegInf;
      break;
    case CovRestrict::NEGATIVE:
      if (p.kappa3 > 0.0) return kNegInf;
      break;
  }
  if (kind == ModelKind::WN2 && !(p.kappa1 * p.kappa2 - p.kappa3 * p.kappa3 > 0.0)) return kNegInf;
  if (s.unimodal && !is_unimodal(kind, p)) return kNegInf;
  return normal_logpdf(std::log(p.kappa1), var) + normal_logpdf(std::log(p.kappa2), var) +
         normal_logpdf(p.kappa3, var);
}

double complete_data_lpd(const TargetSpec& spec, const ComponentParams& p, const TrigData& data,
                         std::span<const std::size_t> idx) {
  const double lp = log_prior(spec.kind, p, spec.prior, spec.support);
  if (!std::isfinite(lp)) return lp;
  const ComponentDensity cd(spec.kind, p, spec.disp, spec.qrnd);
  double s = 0.0;
  for (std::size_t i : idx) s += cd.logpdf(data, i);
  return s + lp;
}

ComponentTarget::ComponentTarget(const TargetSpec& spec, const TrigData& data, std::span<const std::size_t> idx)
    : spec_(spec), data_(data), idx_(idx) {
  if (data.dim() != data_dim(spec.kind)) throw DataError("dimension mismatch");
  has_k3_ = bivariate(spec.kind) && spec.support.cov_restrict != CovRestrict::ZERO;
  dim_ = bivariate(spec.kind) ? (has_k3_ ? 5 : 4) : 2;
}

std::vector<double> ComponentTarget::to_coords(const ComponentParams& p) const {
  if (!bivariate(spec_.kind)) return {std::log(p.kappa1), p.mu1};
  if (has_k3_) return {std::log(p.kappa1), std::log(p.kappa2), p.kappa3, p.mu1, p.mu2};
  return {std::log(p.kappa1), std::log(p.kappa2), p.mu1, p.mu2};
}

ComponentParams ComponentTarget::from_coords(std::span<const double> q) const {
  ComponentParams p;
  if (!bivariate(spec_.kind)) {
    p.kappa1 = std::exp(q[0]);
    p.mu1 = wrap_angle(q[1]);
    return p;
  }
  p.kappa1 = std::exp(q[0]);
  p.kappa2 = std::exp(q[1]);
  p.kappa3 = has_k3_ ? q[2] : 0.0;
  p.mu1 = wrap_angle(q[dim_ - 2]);
  p.mu2 = wrap_angle(q[dim_ - 1]);
  return p;
}

double ComponentTarget::eval(std::span<const double> q, std::span<double> grad) const {
  const ComponentParams p = from_coords(q);
  const double lp = log_prior(spec_.kind, p, spec_.prior, spec_.support);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  const ComponentDensity cd(spec_.kind, p, spec_.disp, spec_.qrnd);
  const double var = spec_.prior.norm_var;
  if (grad.empty()) {
    double s = 0.0;
    for (std::size_t i : idx_) s += cd.logpdf(data_, i);
    return s + lp;
  }
  const int pd = param_dim(spec_.kind);
  std::vector<double> g(static_cast<std::size_t>(pd), 0.0), gi(static_cast<std::size_t>(pd));
  double s = 0.0;
  for (std::size_t i : idx_) {
    s += cd.logpdf_grad(data_, i, gi);
    for (int k = 0; k < pd; ++k) g[k] += gi[k];
  }
  if (!bivariate(spec_.kind)) {
    grad[0] = p.kappa1 * g[0] - q[0] / var;
    grad[1] = g[1];
  } else {
    grad[0] = p.kappa1 * g[0] - q[0] / var;
    grad[1] = p.kappa2 * g[1] - q[1] / var;
    if (has_k3_) grad[2] = g[2] - p.kappa3 / var;
    grad[dim_ - 2] = g[3];
    grad[dim_ - 1] = g[4];
  }
  return s + lp;
}

UpdateResult hmc_update(const ComponentTarget& target, const ComponentParams& current, double epsilon,
                        const HmcSettings& settings, RngStream& rng) {
  UpdateResult out{current, false, false, 0.0};
  const auto d = static_cast<std::size_t>(target.dim());
  std::vector<double> q = target.to_coords(current), g(d), r(d);
  const double l0 = target.eval(q, g);
  for (double& v : r) v = rng.normal();
  const double eps = epsilon * rng.uniform(1.0 - settings.epsilon_jitter, 1.0 + settings.epsilon_jitter);
  const double u = rng.uniform_open();
  if (!std::isfinite(l0)) {
    out.divergent = true;
    return out;
  }
  auto kinetic = [&] {
    double k = 0.0;
    for (double v : r) k += v * v;
    return 0.5 * k;
  };
  const double h0 = -l0 + kinetic();
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (std::size_t k = 0; k < d; ++k) r[k] += 0.5 * eps * g[k];
  double l = l0;
  for (int step = 1; step <= settings.L; ++step) {
    for (std::size_t k = 0; k < d; ++k) {
      q[k] += eps * r[k];
      if (target.is_angle(static_cast<int>(k))) q[k] = wrap_angle(q[k]);
    }
    l = target.eval(q, g);
    if (l == -std::numeric_limits<double>::infinity()) return out;
    if (!std::isfinite(l) || !finite(g)) {
      out.divergent = true;
      return out;
    }
    if (step < settings.L)
      for (std::size_t k = 0; k < d; ++k) r[k] += eps * g[k];
  }
  for (std::size_t k = 0; k < d; ++k) r[k] += 0.5 * eps * g[k];
  const double h1 = -l + kinetic();
  out.energy_error = h1 - h0;
  if (!std::isfinite(out.energy_error)) {
    out.divergent = true;
    return out;
  }
  if (std::log(u) < h0 - h1) {
    out.params = target.from_coords(q);
    out.accepted = true;
  }
  return out;
}

UpdateResult rwmh_update(const ComponentTarget& target, const ComponentParams& current,
                         std::span<const double> propscale, RngStream& rng) {
  UpdateResult out{current, false, false, 0.0};
  const auto d = static_cast<std::size_t>(target.dim());
  if (propscale.size() != d) throw DomainError("propscale has the wrong length");
  std::vector<double> q = target.to_coords(current);
  const double l0 = target.eval(q);
  bool moved = false;
  for (std::size_t k = 0; k < d; ++k) {
    const double step = propscale[k] * rng.normal();
    moved = moved || step != 0.0;
    q[k] += step;
    if (target.is_angle(static_cast<int>(k))) q[k] = wrap_angle(q[k]);
  }
  const double u = rng.uniform_open();
  if (!moved) {
    out.accepted = true;
    return out;
  }
  const double l1 = target.eval(q);
  if (std::isnan(l1)) {
    out.divergent = true;
    return out;
  }
  if (std::isfinite(l0) ? std::log(u) < l1 - l0 : std::isfinite(l1)) {
    out.params = target.from_coords(q);
    out.accepted = true;
  }
  return out;
}

MembershipPass membership_pass(const MixtureDensity& mix, const TrigData& data) {
  const std::size_t k = mix.ncomp(), n = data.size();
  MembershipPass out{std::vector<double>(n * k), 0.0};
  for (std::size_t i = 0; i < n; ++i)
    out.loglik += mix.membership(data, i, std::span<double>(out.probs.data() + i * k, k));
  return out;
}

Allocation allocate(const MembershipPass& pass, std::size_t ncomp, std::span<const double> alpha, RngStream& rng) {
  if (alpha.size() != ncomp) throw DomainError("alpha must have one entry per component");
  const std::size_t n = pass.probs.size() / ncomp;
  Allocation out{std::vector<int>(n), std::vector<std::size_t>(ncomp, 0), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = rng.categorical(std::span<const double>(pass.probs.data() + i * ncomp, ncomp));
    out.labels[i] = static_cast<int>(j);
    ++out.counts[j];
  }
  std::vector<double> a(ncomp);
  for (std::size_t j = 0; j < ncomp; ++j) a[j] = alpha[j] + static_cast<double>(out.counts[j]);
  out.pmix = rng.dirichlet(a);
  return out;
}

Allocation gibbs_allocation(ModelKind kind, const MixtureState& state, const TrigData& data,
                            std::span<const double> alpha, RngStream& rng, const DispConfig& d,
                            const QrndConfig& q) {
  const MixtureDensity mix(kind, state, d, q);
  return allocate(membership_pass(mix, data), state.ncomp(), alpha, rng);
}

void RunningStat::add(double x) {
  ++n;
  if (circular) {
    sum_cos += std::cos(x);
    sum_sin += std::sin(x);
    return;
  }
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

double RunningStat::sd() const {
  if (n < 2) return 0.0;
  if (circular) {
    const double r = std::hypot(sum_cos, sum_sin) / static_cast<double>(n);
    return r > 0.0 ? std::sqrt(std::max(0.0, -2.0 * std::log(std::min(r, 1.0)))) : kTwoPi;
  }
  return std::sqrt(m2 / static_cast<double>(n - 1));
}

TuningState::TuningState(Method m, std::size_t ncomp, int dim, double epsilon0, const HmcSettings& h,
                         double propscale0, const std::vector<bool>& angle_coords)
    : method(m),
      epsilon(ncomp, epsilon0),
      hmc(h),
      propscale(ncomp, std::vector<double>(static_cast<std::size_t>(dim), propscale0)),
      rw_multiplier(ncomp, 2.38 / std::sqrt(static_cast<double>(dim))),
      accept_window(ncomp, 0),
      coord_stats(ncomp) {
  for (auto& stats : coord_stats) {
    stats.resize(static_cast<std::size_t>(dim));
    for (std::size_t c = 0; c < stats.size(); ++c) stats[c].circular = c < angle_coords.size() && angle_coords[c];
  }
}

void TuningState::record(std::size_t comp, bool accepted, std::span<const double> coords) {
  if (accepted) ++accept_window[comp];
  if (method == Method::RWMH)
    for (std::size_t c = 0; c < coords.size(); ++c) coord_stats[comp][c].add(coords[c]);
}

void autotune(TuningState& t) {
  if (t.window_iters == 0) return;
  for (std::size_t j = 0; j < t.accept_window.size(); ++j) {
    const double rate = static_cast<double>(t.accept_window[j]) / static_cast<double>(t.window_iters);
    if (t.method == Method::HMC) {
      if (rate > 0.9) t.epsilon[j] *= 1.1;
      else if (rate < 0.6) t.epsilon[j] *= 0.9;
    } else {
      double factor = 1.0;
      if (rate > 0.3) factor = 1.1;
      else if (rate < 0.2) factor = 0.9;
      t.rw_multiplier[j] *= factor;
      for (std::size_t c = 0; c < t.propscale[j].size(); ++c) {
        const double sd = t.coord_stats[j][c].sd();
        t.propscale[j][c] = sd > 1e-8 ? t.rw_multiplier[j] * sd : t.propscale[j][c] * factor;
      }
    }
    t.accept_window[j] = 0;
  }
  t.window_iters = 0;
}

void apply_permutation(MixtureState& state, std::vector<int>& labels, std::span<const int> perm) {
  const std::size_t k = state.ncomp();
  if (perm.size() != k) throw DomainError("permutation has the wrong length");
  MixtureState old = state;
  std::vector<int> inv(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = static_cast<std::size_t>(perm[j]);
    state.comps[j] = old.comps[src];
    state.pmix[j] = old.pmix[src];
    inv[src] = static_cast<int>(j);
  }
  for (int& l : labels) l = inv[static_cast<std::size_t>(l)];
}

std::vector<int> permute_labels_step(MixtureState& state, std::vector<int>& labels, TuningState* tuning,
                                     RngStream& rng) {
  const int k = static_cast<int>(state.ncomp());
  if (k < 2) return std::vector<int>(static_cast<std::size_t>(k), 0);
  const auto perm = rng.permutation(k);
  apply_permutation(state, labels, perm);
  if (tuning) {
    auto permute = [&](auto& v) {
      auto old = v;
      for (std::size_t j = 0; j < perm.size(); ++j) v[j] = old[static_cast<std::size_t>(perm[j])];
    };
    permute(tuning->epsilon);
    permute(tuning->propscale);
    permute(tuning->rw_multiplier);
    permute(tuning->accept_window);
    permute(tuning->coord_stats);
  }
  return perm;
}

namespace {

// Inverse of A(k) = I1(k)/I0(k), Best-Fisher rational approximation.
double inverse_bessel_ratio(double r) {
  if (r < 0.53) return 2.0 * r + r * r * r + 5.0 * std::pow(r, 5) / 6.0;
  if (r < 0.85) return -0.4 + 1.39 * r + 0.43 / (1.0 - r);
  return 1.0 / (r * r * r - 4.0 * r * r + 3.0 * r);
}

struct KMeansResult {
  std::vector<int> labels;
  double sse = 0.0;
};

double sq_dist(const double* a, const double* b, int m) {
  double s = 0.0;
  for (int c = 0; c < m; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

KMeansResult kmeans_once(const std::vector<double>& x, std::size_t n, int m, std::size_t k, RngStream& rng) {
  std::vector<double> centers(k * m);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto set_center = [&](std::size_t j, std::size_t i) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * m), m, centers.begin() + static_cast<std::ptrdiff_t>(j * m));
  };
  set_center(0, rng.uniform_index(n));
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(&x[i * m], &centers[(j - 1) * m], m));
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    set_center(j, total > 0.0 ? rng.categorical(d2) : rng.uniform_index(n));
  }
  KMeansResult out{std::vector<int>(n, 0), 0.0};
  std::vector<std::size_t> counts(k);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double dd = sq_dist(&x[i * m], &centers[j * m], m);
        if (dd < bd) {
          bd = dd;
          best = static_cast<int>(j);
        }
      }
      if (out.labels[i] != best) changed = true;
      out.labels[i] = best;
    }
    if (!changed) break;
    std::fill(centers.begin(), centers.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(out.labels[i]);
      ++counts[j];
      for (int c = 0; c < m; ++c) centers[j * m + c] += x[i * m + c];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        set_center(j, rng.uniform_index(n));
        continue;
      }
      for (int c = 0; c < m; ++c) centers[j * m + c] /= static_cast<double>(counts[j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    out.sse += sq_dist(&x[i * m], &centers[static_cast<std::size_t>(out.labels[i]) * m], m);
  return out;
}

}  // namespace

MixtureState init_kmeans_moment(ModelKind kind, const AngleData& data, std::size_t ncomp, RngStream& rng) {
  const int dim = data_dim(kind);
  if (data.dim() != dim) throw DataError("dimension mismatch");
  const std::size_t n = data.size();
  if (ncomp == 0) throw DomainError("need at least one component");
  if (n < ncomp) throw DataError("fewer observations than components");
  const int m = 2 * dim;
  std::vector<double> x(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) {
      x[i * m + 2 * c] = std::cos(data[i][c]);
      x[i * m + 2 * c + 1] = std::sin(data[i][c]);
    }
  KMeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 10; ++restart) {
    auto r = kmeans_once(x, n, m, ncomp, rng);
    if (r.sse < best.sse) best = std::move(r);
  }
  MixtureState state;
  state.comps.resize(ncomp);
  state.pmix.assign(ncomp, 0.0);
  std::vector<std::array<double, 4>> sums(ncomp, {0, 0, 0, 0});
  std::vector<std::size_t> counts(ncomp, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(best.labels[i]);
    ++counts[j];
    for (int c = 0; c < m; ++c) sums[j][static_cast<std::size_t>(c)] += x[i * m + c];
  }
  const bool wrapped_normal = kind == ModelKind::WN || kind == ModelKind::WN2;
  double total = 0.0;
  for (std::size_t j = 0; j < ncomp; ++j) {
    const double cnt = std::max<double>(1.0, static_cast<double>(counts[j]));
    ComponentParams p;
    p.kappa3 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double mc = sums[j][2 * c] / cnt, ms = sums[j][2 * c + 1] / cnt;
      const double rbar = std::hypot(mc, ms);
      const double mu = counts[j] > 0 && rbar > 1e-12 ? wrap_angle(std::atan2(ms, mc)) : 0.0;
      double kappa = 0.01;
      if (rbar >= 1.0) kappa = 100.0;
      else if (rbar > 0.0) kappa = wrapped_normal ? -1.0 / (2.0 * std::log(rbar)) : inverse_bessel_ratio(rbar);
      kappa = std::clamp(kappa, 0.01, 100.0);
      if (c == 0) {
        p.mu1 = mu;
        p.kappa1 = kappa;
      } else {
        p.mu2 = mu;
        p.kappa2 = kappa;
      }
    }
    state.comps[j] = p;
    state.pmix[j] = std::max(1.0, static_cast<double>(counts[j]));
    total += state.pmix[j];
  }
  for (double& w : state.pmix) w /= total;
  return state;
}

void FitConfig::validate() const {
  if (ncomp < 1) throw ConfigError("ncomp must be at least 1");
  if (n_iter < 1) throw ConfigError("n-iter must be at least 1");
  if (!(burnin_prop >= 0.0 && burnin_prop < 1.0)) throw ConfigError("burnin-prop must lie in [0, 1)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (n_chains < 1) throw ConfigError("n-chains must be at least 1");
  if (int_displ < 1 || int_displ > 5) throw ConfigError("int-displ must lie in 1..5");
  if (n_qrnd < 1) throw ConfigError("n-qrnd must be at least 1");
  if (!(prior.norm_var > 0.0) || !std::isfinite(prior.norm_var)) throw ConfigError("norm-var must be positive");
  for (double a : prior.alpha(model, static_cast<std::size_t>(ncomp)))
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("pmix alpha entries must be positive");
  if (!(epsilon_init > 0.0)) throw ConfigError("epsilon must be positive");
  if (L < 2) throw ConfigError("L must be at least 2");
  if (!(epsilon_jitter >= 0.0 && epsilon_jitter < 1.0)) throw ConfigError("epsilon-jitter must lie in [0, 1)");
  if (!(propscale_init > 0.0)) throw ConfigError("propscale must be positive");
  if (tune_interval < 1) throw ConfigError("tune-interval must be at least 1");
  if (cov_restrict != CovRestrict::NONE && !bivariate(model))
    throw ConfigError("cov-restrict applies to bivariate models only");
  if (n_iter - n_burnin() < 1) throw ConfigError("no iterations left after burn-in");
}

int FitConfig::n_burnin() const { return static_cast<int>(std::floor(burnin_prop * n_iter)); }

TargetSpec FitConfig::target() const {
  TargetSpec t;
  t.kind = model;
  t.prior = prior;
  t.support = Support{cov_restrict, unimodal_component};
  t.disp = DispConfig{int_displ};
  t.qrnd = QrndConfig{n_qrnd};
  return t;
}

std::size_t FitResult::total_draws() const {
  std::size_t s = 0;
  for (const auto& c : chains) s += c.draws.size();
  return s;
}

double state_lpd(const FitConfig& config, const MixtureState& state, double loglik) {
  const auto alpha = config.prior.alpha(config.model, state.ncomp());
  const Support support{config.cov_restrict, config.unimodal_component};
  double s = loglik;
  for (std::size_t j = 0; j < state.ncomp(); ++j) {
    s += log_prior(config.model, state.comps[j], config.prior, support);
    s += (alpha[j] - 1.0) * std::log(state.pmix[j]);
  }
  return s;
}

unsigned chain_threads() {
  if (const char* env = std::getenv("TORUSMIX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

ChainSamples run_chain(const FitConfig& config, const TargetSpec& spec, const TrigData& trig, const AngleData& data,
                       int chain, const std::optional<MixtureState>& start, std::span<const double> alpha) {
  const auto k = static_cast<std::size_t>(config.ncomp);
  RngStream rng(config.seed, static_cast<std::uint64_t>(chain));
  MixtureState state;
  if (start) {
    state = *start;
  } else {
    RngStream init_rng = rng.split(0);
    state = init_kmeans_moment(config.model, data, k, init_rng);
  }

  const std::vector<std::size_t> none;
  const ComponentTarget shape(spec, trig, none);
  std::vector<bool> angle_flags(static_cast<std::size_t>(shape.dim()));
  for (int c = 0; c < shape.dim(); ++c) angle_flags[static_cast<std::size_t>(c)] = shape.is_angle(c);
  TuningState tuning(config.method, k, shape.dim(), config.epsilon_init, HmcSettings{config.L, config.epsilon_jitter},
                     config.propscale_init, angle_flags);

  ChainSamples out;
  out.chain_id = chain + 1;
  out.accepted.assign(k, 0);
  out.proposed.assign(k, 0);
  const int n_burn = config.n_burnin();

  MembershipPass pass = membership_pass(MixtureDensity(config.model, state, spec.disp, spec.qrnd), trig);
  std::vector<std::vector<std::size_t>> members(k);
  std::vector<std::uint8_t> flags_it(k);
  for (int it = 1; it <= config.n_iter; ++it) {
    Allocation alloc = allocate(pass, k, alpha, rng);
    state.pmix = alloc.pmix;
    for (auto& m : members) m.clear();
    for (std::size_t i = 0; i < alloc.labels.size(); ++i)
      members[static_cast<std::size_t>(alloc.labels[i])].push_back(i);

    const bool burning = it <= n_burn;
    for (std::size_t j = 0; j < k; ++j) {
      const ComponentTarget target(spec, trig, members[j]);
      RngStream crng = rng.split(static_cast<std::uint64_t>(it) * k + j + 1);
      const UpdateResult res = config.method == Method::HMC
                                   ? hmc_update(target, state.comps[j], tuning.epsilon[j], tuning.hmc, crng)
                                   : rwmh_update(target, state.comps[j], tuning.propscale[j], crng);
      state.comps[j] = res.params;
      flags_it[j] = res.accepted ? 1 : 0;
      if (burning) {
        tuning.record(j, res.accepted, target.to_coords(res.params));
      } else {
        ++out.proposed[j];
        if (res.accepted) ++out.accepted[j];
        if (res.divergent) ++out.divergent;
      }
    }

    if (burning) {
      ++tuning.window_iters;
      if (config.autotune && it % config.tune_interval == 0) {
        TuneEvent ev{it, {}, {}};
        for (std::size_t j = 0; j < k; ++j)
          ev.accept_rate.push_back(static_cast<double>(tuning.accept_window[j]) /
                                   static_cast<double>(tuning.window_iters));
        autotune(tuning);
        for (std::size_t j = 0; j < k; ++j) {
          if (config.method == Method::HMC) {
            ev.step.push_back(tuning.epsilon[j]);
          } else {
            const auto& ps = tuning.propscale[j];
            ev.step.push_back(std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size()));
          }
        }
        out.tuning.push_back(std::move(ev));
      }
    } else if (config.perm_sampling && k >= 2) {
      const auto perm = permute_labels_step(state, alloc.labels, &tuning, rng);
      const auto old = flags_it;
      for (std::size_t j = 0; j < k; ++j) flags_it[j] = old[static_cast<std::size_t>(perm[j])];
    }

    pass = membership_pass(MixtureDensity(config.model, state, spec.disp, spec.qrnd), trig);
    if (!burning && (it - n_burn - 1) % config.thin == 0) {
      Draw d;
      d.iteration = it;
      d.state = state;
      d.loglik = pass.loglik;
      d.lpd = state_lpd(config, state, pass.loglik);
      d.accepted = flags_it;
      if (config.keep_allocations) d.labels = std::move(alloc.labels);
      out.draws.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace

FitResult fit_angmix(const FitConfig& config, const AngleData& data, const std::optional<MixtureState>& start) {
  config.validate();
  if (data.dim() != data_dim(config.model)) throw DataError("dimension mismatch");
  const auto k = static_cast<std::size_t>(config.ncomp);
  if (data.size() < k) throw DataError("fewer observations than components");
  const TargetSpec spec = config.target();
  if (start) {
    validate_state(*start);
    if (start->ncomp() != k) throw DomainError("start state has the wrong number of components");
    for (const auto& c : start->comps)
      if (!std::isfinite(log_prior(config.model, c, spec.prior, spec.support)))
        throw DomainError("start state lies outside the support");
  }
  const auto alpha = config.prior.alpha(config.model, k);
  const TrigData trig(data);

  FitResult result;
  result.config = config;
  result.data = data;
  result.chains.resize(static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(result.chains.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < result.chains.size(); c = next++) {
      try {
        result.chains[c] = run_chain(config, spec, trig, data, static_cast<int>(c), start, alpha);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const unsigned nthreads = std::min<unsigned>(chain_threads(), static_cast<unsigned>(config.n_chains));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& c : result.chains) {
    std::size_t prop = 0, acc = 0;
    for (std::size_t j = 0; j < k; ++j) {
      prop += c.proposed[j];
      acc += c.accepted[j];
    }
    if (c.divergent > 0)
      result.warnings.push_back("chain " + std::to_string(c.chain_id) + ": " + std::to_string(c.divergent) +
                                " divergent transitions after burn-in");
    if (prop > 0 && acc == 0)
      result.warnings.push_back("chain " + std::to_string(c.chain_id) + ": no proposals accepted after burn-in");
  }
  return result;
}

}  // namespace torusmix
