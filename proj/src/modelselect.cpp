#include "torusmix/modelselect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "torusmix/postprocess.hpp"

namespace torusmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sample_var(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (n - 1.0);
}

void require_two(std::size_t draws) {
  if (draws < 2) throw DomainError("at least 2 retained draws are required");
}

std::vector<double> column(const PointwiseLoglik& ll, std::size_t i) {
  std::vector<double> c(ll.draws);
  for (std::size_t s = 0; s < ll.draws; ++s) c[s] = ll.at(s, i);
  return c;
}

FitResult criterion_fit(const FitResult& fit, bool use_best) {
  if (!use_best || fit.chains.size() <= 1) return fit;
  const std::vector<int> id = {best_chain(fit)};
  return select_chains(fit, id);
}

}  // namespace

std::string_view to_string(CritKind k) {
  switch (k) {
    case CritKind::WAIC: return "WAIC";
    case CritKind::LOOIC: return "LOOIC";
    case CritKind::AIC: return "AIC";
    case CritKind::BIC: return "BIC";
    case CritKind::DIC: return "DIC";
  }
  return "WAIC";
}

CritKind parse_crit_kind(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto k : {CritKind::WAIC, CritKind::LOOIC, CritKind::AIC, CritKind::BIC, CritKind::DIC})
    if (up == to_string(k)) return k;
  if (up == "LOO") return CritKind::LOOIC;
  throw ConfigError("unknown criterion '" + std::string(name) + "'");
}

double oriented(const CritValue& c) {
  return (c.kind == CritKind::WAIC || c.kind == CritKind::LOOIC) ? -c.value : c.value;
}

PointwiseLoglik pointwise_loglik(const FitResult& fit) {
  const auto& c = fit.config;
  const TrigData trig(fit.data);
  PointwiseLoglik out;
  out.draws = fit.total_draws();
  out.points = trig.size();
  out.values.resize(out.draws * out.points);
  std::size_t s = 0;
  for (const auto& ch : fit.chains)
    for (const auto& d : ch.draws) {
      const MixtureDensity mix(c.model, d.state, DispConfig{c.int_displ}, QrndConfig{c.n_qrnd});
      for (std::size_t i = 0; i < out.points; ++i) out.values[s * out.points + i] = mix.logpdf(trig, i);
      ++s;
    }
  return out;
}

CritValue waic(const PointwiseLoglik& ll) {
  require_two(ll.draws);
  CritValue r;
  r.kind = CritKind::WAIC;
  const double log_s = std::log(static_cast<double>(ll.draws));
  r.elpd_pointwise.resize(ll.points);
  for (std::size_t i = 0; i < ll.points; ++i) {
    const auto col = column(ll, i);
    const double lppd_i = log_sum_exp(col) - log_s;
    if (!std::isfinite(lppd_i)) throw DegenerateError("zero density at a data point under every draw");
    const double mean_i = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(ll.draws);
    const double var_i = sample_var(col);
    r.lppd += lppd_i;
    r.p_eff += var_i;
    r.p_eff_alt += 2.0 * (lppd_i - mean_i);
    r.elpd_pointwise[i] = lppd_i - var_i;
  }
  r.elpd = r.lppd - r.p_eff;
  r.value = r.elpd;
  return r;
}

CritValue loo_is(const PointwiseLoglik& ll) {
  require_two(ll.draws);
  CritValue r;
  r.kind = CritKind::LOOIC;
  const double log_s = std::log(static_cast<double>(ll.draws));
  r.elpd_pointwise.resize(ll.points);
  std::vector<double> logw(ll.draws), num(ll.draws);
  for (std::size_t i = 0; i < ll.points; ++i) {
    const auto col = column(ll, i);
    const double lppd_i = log_sum_exp(col) - log_s;
    if (!std::isfinite(lppd_i)) throw DegenerateError("zero density at a data point under every draw");
    for (std::size_t s = 0; s < ll.draws; ++s) logw[s] = -col[s];
    // Truncate at mean(w) * S^(3/4).
    const double cap = log_sum_exp(logw) - log_s + 0.75 * log_s;
    for (std::size_t s = 0; s < ll.draws; ++s) {
      logw[s] = std::min(logw[s], cap);
      num[s] = col[s] == kNegInf ? kNegInf : logw[s] + col[s];
    }
    const double elpd_i = log_sum_exp(num) - log_sum_exp(logw);
    r.lppd += lppd_i;
    r.elpd_pointwise[i] = elpd_i;
    r.elpd += elpd_i;
  }
  r.p_eff = r.lppd - r.elpd;
  r.value = r.elpd;
  return r;
}

CritValue waic(const FitResult& fit) {
  require_two(fit.total_draws());
  return waic(pointwise_loglik(fit));
}

CritValue loo_is(const FitResult& fit) {
  require_two(fit.total_draws());
  return loo_is(pointwise_loglik(fit));
}

int n_free_params(const FitConfig& config) {
  int per = param_dim(config.model);
  if (data_dim(config.model) == 2 && config.cov_restrict == CovRestrict::ZERO) --per;
  return config.ncomp * per + config.ncomp - 1;
}

CritValue aic(const FitResult& fit) {
  CritValue r;
  r.kind = CritKind::AIC;
  r.loglik_hat = max_loglik(fit);
  r.n_params = n_free_params(fit.config);
  r.p_eff = r.n_params;
  r.value = -2.0 * r.loglik_hat + 2.0 * r.n_params;
  return r;
}

CritValue bic(const FitResult& fit) {
  CritValue r;
  r.kind = CritKind::BIC;
  r.loglik_hat = max_loglik(fit);
  r.n_params = n_free_params(fit.config);
  r.p_eff = r.n_params;
  r.value = -2.0 * r.loglik_hat + r.n_params * std::log(static_cast<double>(fit.data.size()));
  return r;
}

CritValue dic(const FitResult& fit) {
  require_two(fit.total_draws());
  std::vector<double> dev;
  for (const auto& ch : fit.chains)
    for (const auto& d : ch.draws) dev.push_back(-2.0 * d.loglik);
  const double dbar = std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(dev.size());
  CritValue r;
  r.kind = CritKind::DIC;
  // loglik_hat holds the log-likelihood at the posterior mean.
  r.loglik_hat = loglik_at(fit, pointest(fit, Reducer::MEAN));
  r.p_eff = sample_var(dev) / 2.0;
  r.p_eff_alt = dbar + 2.0 * r.loglik_hat;
  r.value = dbar + r.p_eff;
  return r;
}

CritValue criterion(const FitResult& fit, CritKind kind) {
  switch (kind) {
    case CritKind::WAIC: return waic(fit);
    case CritKind::LOOIC: return loo_is(fit);
    case CritKind::AIC: return aic(fit);
    case CritKind::BIC: return bic(fit);
    case CritKind::DIC: return dic(fit);
  }
  return waic(fit);
}

ElpdComparison elpd_compare(const CritValue& a, const CritValue& b) {
  const std::size_t n = a.elpd_pointwise.size();
  if (n == 0 || b.elpd_pointwise.size() != n) throw DataError("pointwise elpd vectors differ in length");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = b.elpd_pointwise[i] - a.elpd_pointwise[i];
  ElpdComparison r;
  r.elpd_diff = std::accumulate(d.begin(), d.end(), 0.0);
  r.se_diff = n > 1 ? std::sqrt(static_cast<double>(n) * sample_var(d)) : 0.0;
  if (r.se_diff > 0.0)
    r.z = r.elpd_diff / r.se_diff;
  else
    r.z = r.elpd_diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.elpd_diff);
  return r;
}

int best_chain(const FitResult& fit) {
  int best = 0;
  double best_mean = kNegInf;
  for (const auto& ch : fit.chains) {
    if (ch.draws.empty()) continue;
    double s = 0.0;
    for (const auto& d : ch.draws) s += d.lpd;
    s /= static_cast<double>(ch.draws.size());
    if (best == 0 || s > best_mean) {
      best = ch.chain_id;
      best_mean = s;
    }
  }
  if (best == 0) throw DomainError("fit has no retained draws");
  return best;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("probability must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

MixtureState split_largest(const MixtureState& prev) {
  MixtureState s = prev;
  const auto j = static_cast<std::size_t>(std::max_element(s.pmix.begin(), s.pmix.end()) - s.pmix.begin());
  s.pmix[j] /= 2.0;
  s.comps.push_back(s.comps[j]);
  s.pmix.push_back(s.pmix[j]);
  return s;
}

IncrementalResult fit_incremental(const FitConfig& config, const AngleData& data, const IncrementalConfig& inc) {
  if (inc.start_ncomp < 1) throw ConfigError("start_ncomp must be at least 1");
  if (inc.max_ncomp < inc.start_ncomp) throw ConfigError("max_ncomp must be at least start_ncomp");
  if (!(inc.alpha > 0.0 && inc.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const bool elpd_test = inc.crit == CritKind::WAIC || inc.crit == CritKind::LOOIC;
  const double z_crit = normal_quantile(1.0 - inc.alpha);

  IncrementalResult res;
  std::optional<FitResult> prev_fit;
  std::optional<MixtureState> prev_map;
  std::size_t best_idx = 0;
  bool stopped = false;
  for (int k = inc.start_ncomp; k <= inc.max_ncomp; ++k) {
    FitConfig c = config;
    c.ncomp = k;
    std::optional<MixtureState> start;
    if (inc.prev_par && k >= 3 && prev_map) start = split_largest(*prev_map);
    FitResult fit = fit_angmix(c, data, start);
    const FitResult cfit = criterion_fit(fit, inc.use_best_chain);
    CritValue crit = criterion(cfit, inc.crit);
    res.ncomp_all.push_back(k);
    res.maxllik_all.push_back(max_loglik(fit));
    if (inc.prev_par) prev_map = pointest(cfit, Reducer::MODE);
    const std::size_t idx = res.crit_all.size();
    res.crit_all.push_back(std::move(crit));
    if (idx > 0) {
      const auto& prev = res.crit_all[idx - 1];
      const auto& cur = res.crit_all[idx];
      const bool keep_prev = elpd_test ? !(elpd_compare(prev, cur).z > z_crit) : oriented(cur) > oriented(prev);
      if (keep_prev) {
        best_idx = idx - 1;
        stopped = true;
      } else {
        best_idx = idx;
      }
    }
    if (inc.keep_all) res.fit_all.push_back(fit);
    if (stopped) break;
    prev_fit = std::move(fit);
  }
  res.converged = stopped || inc.start_ncomp == inc.max_ncomp;
  res.ncomp_best = res.ncomp_all[best_idx];
  res.crit_best = res.crit_all[best_idx];
  res.maxllik_best = res.maxllik_all[best_idx];
  // prev_fit holds the fit at ncomp_best: the last fit, or the one before the stop.
  res.fit_best = std::move(*prev_fit);
  return res;
}

}  // namespace torusmix
