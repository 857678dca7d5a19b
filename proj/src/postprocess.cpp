#include "torusmix/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace torusmix {

namespace {

bool is_mean_param(const std::string& name) { return name.rfind("mu", 0) == 0; }

void require_draws(const FitResult& fit) {
  if (fit.total_draws() == 0) throw DomainError("fit has no retained draws");
}

double circular_mean(std::span<const double> x) {
  double c = 0.0, s = 0.0;
  for (double v : x) {
    c += std::cos(v);
    s += std::sin(v);
  }
  return wrap_angle(std::atan2(s, c));
}

std::vector<double> pooled(const FitResult& fit, const std::string& name, std::size_t comp) {
  std::vector<double> v;
  v.reserve(fit.total_draws());
  for (const auto& ch : fit.chains)
    for (const auto& d : ch.draws) v.push_back(param_value(fit.config.model, d.state, name, comp));
  return v;
}

void set_param(ModelKind kind, MixtureState& s, const std::string& name, std::size_t comp, double value) {
  if (name == "pmix") {
    s.pmix[comp] = value;
    return;
  }
  const auto names = param_names(kind);
  const auto it = std::find(names.begin(), names.end(), name);
  s.comps[comp].set(kind, static_cast<int>(it - names.begin()), value);
}

MixtureState reduce(const FitResult& fit, const std::function<double(const std::string&, std::span<const double>)>& f) {
  require_draws(fit);
  const auto k = fit.ncomp();
  MixtureState s;
  s.comps.resize(k);
  s.pmix.assign(k, 0.0);
  for (const auto& name : fit_param_names(fit.config.model))
    for (std::size_t j = 0; j < k; ++j) set_param(fit.config.model, s, name, j, f(name, pooled(fit, name, j)));
  const double total = std::accumulate(s.pmix.begin(), s.pmix.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateError("reduced mixing proportions sum to zero");
  for (double& w : s.pmix) w /= total;
  return s;
}

// Membership matrices of every draw in a chain, single precision.
std::vector<float> chain_memberships(const FitResult& fit, const ChainSamples& ch, const TrigData& trig) {
  const std::size_t k = fit.ncomp(), n = trig.size();
  const auto& c = fit.config;
  std::vector<float> out(ch.draws.size() * n * k);
  std::vector<double> row(k);
  for (std::size_t t = 0; t < ch.draws.size(); ++t) {
    const MixtureDensity mix(c.model, ch.draws[t].state, DispConfig{c.int_displ}, QrndConfig{c.n_qrnd});
    for (std::size_t i = 0; i < n; ++i) {
      mix.membership(trig, i, row);
      for (std::size_t j = 0; j < k; ++j) out[(t * n + i) * k + j] = static_cast<float>(row[j]);
    }
  }
  return out;
}

// cost[a][b] = -sum_i P[i, b] log Q[i, a]: assigning draw component b to label a.
std::vector<double> kl_cost(const float* p, const std::vector<double>& log_q, std::size_t n, std::size_t k) {
  std::vector<double> cost(k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) cost[a * k + b] -= p[i * k + b] * log_q[i * k + a];
  return cost;
}

std::vector<double> log_average(const std::vector<float>& p, const std::vector<std::vector<int>>& perms,
                                std::size_t n, std::size_t k) {
  const std::size_t t_count = perms.size();
  std::vector<double> q(n * k, 0.0);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < k; ++a)
        q[i * k + a] += p[(t * n + i) * k + static_cast<std::size_t>(perms[t][a])];
  for (double& v : q) v = std::log(std::max(v / static_cast<double>(t_count), 1e-300));
  return q;
}

std::vector<int> compose(const std::vector<int>& outer, const std::vector<int>& inner) {
  // Apply `inner` then `outer`: new k = old inner[outer[k]].
  std::vector<int> r(outer.size());
  for (std::size_t k = 0; k < outer.size(); ++k) r[k] = inner[static_cast<std::size_t>(outer[k])];
  return r;
}

std::vector<int> inverse(const std::vector<int>& p) {
  std::vector<int> r(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) r[static_cast<std::size_t>(p[k])] = static_cast<int>(k);
  return r;
}

}  // namespace

std::vector<std::string> fit_param_names(ModelKind kind) {
  auto names = param_names(kind);
  names.push_back("pmix");
  return names;
}

double param_value(ModelKind kind, const MixtureState& state, const std::string& name, std::size_t comp) {
  if (comp >= state.ncomp()) throw DomainError("component index out of range");
  if (name == "pmix") return state.pmix[comp];
  const auto names = param_names(kind);
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DomainError("unknown parameter '" + name + "'");
  return state.comps[comp].get(kind, static_cast<int>(it - names.begin()));
}

FitResult add_burnin_thin(const FitResult& fit, double extra_burnin_prop, int extra_thin) {
  if (!(extra_burnin_prop >= 0.0 && extra_burnin_prop < 1.0)) throw DomainError("burn-in proportion must lie in [0, 1)");
  if (extra_thin < 1) throw DomainError("thinning must be at least 1");
  FitResult out = fit;
  for (auto& ch : out.chains) {
    const std::size_t n = ch.draws.size();
    const auto drop = static_cast<std::size_t>(std::floor(extra_burnin_prop * static_cast<double>(n)));
    std::vector<Draw> kept;
    for (std::size_t i = drop; i < n; i += static_cast<std::size_t>(extra_thin)) kept.push_back(ch.draws[i]);
    if (kept.empty()) throw DomainError("no draws left after extra burn-in and thinning");
    ch.draws = std::move(kept);
  }
  return out;
}

FitResult select_chains(const FitResult& fit, std::span<const int> chain_ids) {
  if (chain_ids.empty()) throw DomainError("no chains selected");
  FitResult out = fit;
  out.chains.clear();
  std::vector<int> seen;
  for (int id : chain_ids) {
    const auto it = std::find_if(fit.chains.begin(), fit.chains.end(), [id](const ChainSamples& c) { return c.chain_id == id; });
    if (it == fit.chains.end()) throw DomainError("unknown chain id " + std::to_string(id));
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) throw DomainError("chain id listed twice");
    seen.push_back(id);
    out.chains.push_back(*it);
  }
  return out;
}

std::vector<int> hungarian(std::span<const double> cost, std::size_t k) {
  // Potentials formulation, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= k; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<bool> used(k + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(k);
  for (std::size_t j = 1; j <= k; ++j) col[p[j] - 1] = static_cast<int>(j - 1);
  return col;
}

FitResult fix_label(const FitResult& fit, RelabelReport* report) {
  const std::size_t k = fit.ncomp();
  FitResult out = fit;
  RelabelReport rep;
  rep.perms.resize(fit.chains.size());
  std::vector<int> identity(k);
  std::iota(identity.begin(), identity.end(), 0);
  if (k < 2) {
    for (std::size_t c = 0; c < fit.chains.size(); ++c)
      rep.perms[c].assign(fit.chains[c].draws.size(), identity);
    if (report) *report = std::move(rep);
    return out;
  }
  const TrigData trig(fit.data);
  const std::size_t n = trig.size();
  std::vector<std::vector<double>> chain_logq(fit.chains.size());
  for (std::size_t c = 0; c < fit.chains.size(); ++c) {
    const auto& ch = fit.chains[c];
    const std::size_t t_count = ch.draws.size();
    if (t_count == 0) continue;
    const auto p = chain_memberships(fit, ch, trig);
    auto& perms = rep.perms[c];
    perms.assign(t_count, identity);
    // Start from the chain's highest-lpd draw so the result does not depend
    // on the incoming labels.
    std::size_t pivot = 0;
    for (std::size_t t = 1; t < t_count; ++t)
      if (ch.draws[t].lpd > ch.draws[pivot].lpd) pivot = t;
    std::vector<double> log_q(n * k);
    for (std::size_t i = 0; i < n * k; ++i)
      log_q[i] = std::log(std::max(static_cast<double>(p[pivot * n * k + i]), 1e-300));
    bool changed = true;
    int sweep = 0;
    while (changed && sweep < 100) {
      ++sweep;
      changed = false;
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto cost = kl_cost(p.data() + t * n * k, log_q, n, k);
        auto perm = hungarian(cost, k);
        // Keep the current permutation on ties.
        double cur = 0.0, best = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
          cur += cost[a * k + static_cast<std::size_t>(perms[t][a])];
          best += cost[a * k + static_cast<std::size_t>(perm[a])];
        }
        if (perm != perms[t] && best < cur - 1e-9 * std::max(1.0, std::abs(cur))) {
          perms[t] = std::move(perm);
          changed = true;
        }
      }
      log_q = log_average(p, perms, n, k);
    }
    rep.sweeps = std::max(rep.sweeps, sweep);
    if (changed) rep.converged = false;
    chain_logq[c] = std::move(log_q);
  }
  // Anchor: chain 1's first draw keeps its labels.
  if (!rep.perms.empty() && !rep.perms[0].empty()) {
    const auto anchor = inverse(rep.perms[0][0]);
    for (auto& perm : rep.perms[0]) perm = compose(anchor, perm);
    std::vector<double> q(n * k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < k; ++a) q[i * k + a] = chain_logq[0][i * k + static_cast<std::size_t>(anchor[a])];
    chain_logq[0] = std::move(q);
  }
  for (std::size_t c = 1; c < fit.chains.size(); ++c) {
    if (rep.perms[c].empty() || chain_logq[0].empty()) continue;
    // Align the chain's average membership to chain 1's.
    std::vector<float> pc(n * k);
    for (std::size_t i = 0; i < n * k; ++i) pc[i] = static_cast<float>(std::exp(chain_logq[c][i]));
    const auto align = hungarian(kl_cost(pc.data(), chain_logq[0], n, k), k);
    for (auto& perm : rep.perms[c]) perm = compose(align, perm);
  }
  for (std::size_t c = 0; c < out.chains.size(); ++c)
    for (std::size_t t = 0; t < out.chains[c].draws.size(); ++t) {
      auto& d = out.chains[c].draws[t];
      const auto& perm = rep.perms[c][t];
      apply_permutation(d.state, d.labels, perm);
      if (d.accepted.size() == k) {
        const auto old = d.accepted;
        for (std::size_t a = 0; a < k; ++a) d.accepted[a] = old[static_cast<std::size_t>(perm[a])];
      }
    }
  if (!rep.converged) out.warnings.push_back("fix_label did not converge within 100 sweeps");
  if (report) *report = std::move(rep);
  return out;
}

Reducer parse_reducer(std::string_view name) {
  if (name == "mean" || name == "MEAN") return Reducer::MEAN;
  if (name == "mode" || name == "MODE" || name == "map" || name == "MAP") return Reducer::MODE;
  throw ConfigError("unknown point estimator '" + std::string(name) + "'");
}

std::string_view to_string(Reducer r) { return r == Reducer::MEAN ? "mean" : "mode"; }

MixtureState pointest(const FitResult& fit, Reducer reducer) {
  require_draws(fit);
  if (reducer == Reducer::MODE) {
    const Draw* best = nullptr;
    for (const auto& ch : fit.chains)
      for (const auto& d : ch.draws)
        if (!best || d.lpd > best->lpd) best = &d;
    return best->state;
  }
  return reduce(fit, [](const std::string& name, std::span<const double> v) {
    if (is_mean_param(name)) return circular_mean(v);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  });
}

MixtureState pointest(const FitResult& fit, const std::function<double(std::span<const double>)>& reducer) {
  return reduce(fit, [&](const std::string&, std::span<const double> v) { return reducer(v); });
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<ParamQuantiles> quantiles(const FitResult& fit, std::span<const double> probs) {
  require_draws(fit);
  std::vector<ParamQuantiles> out;
  for (std::size_t j = 0; j < fit.ncomp(); ++j)
    for (const auto& name : fit_param_names(fit.config.model)) {
      auto v = pooled(fit, name, j);
      if (is_mean_param(name)) {
        const double c = circular_mean(v);
        for (double& x : v) x = c + std::remainder(x - c, kTwoPi);
      }
      std::sort(v.begin(), v.end());
      ParamQuantiles q{name, static_cast<int>(j + 1), {}};
      for (double p : probs) q.values.push_back(quantile_sorted(v, p));
      out.push_back(std::move(q));
    }
  return out;
}

std::vector<CredibleInterval> credible_interval(const FitResult& fit, double a) {
  if (!(a > 0.0 && a < 1.0)) throw DomainError("level must lie in (0, 1)");
  const std::array<double, 2> probs = {a / 2.0, 1.0 - a / 2.0};
  std::vector<CredibleInterval> out;
  for (const auto& q : quantiles(fit, probs)) out.push_back({q.parameter, q.component, q.values[0], q.values[1]});
  return out;
}

std::vector<int> latent_allocation(const FitResult& fit, Reducer reducer) {
  const auto state = pointest(fit, reducer);
  const auto& c = fit.config;
  const MixtureDensity mix(c.model, state, DispConfig{c.int_displ}, QrndConfig{c.n_qrnd});
  const TrigData trig(fit.data);
  std::vector<double> row(state.ncomp());
  std::vector<int> out(trig.size());
  for (std::size_t i = 0; i < trig.size(); ++i) {
    mix.membership(trig, i, row);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()) + 1;
  }
  return out;
}

double d_fitted(std::span<const double> psi, const FitResult& fit, Reducer reducer) {
  const auto& c = fit.config;
  return mixture_logpdf(c.model, pointest(fit, reducer), psi, DispConfig{c.int_displ}, QrndConfig{c.n_qrnd});
}

MixtureDraw r_fitted(std::size_t n, const FitResult& fit, Reducer reducer, RngStream& rng) {
  return rmix(n, fit.config.model, pointest(fit, reducer), rng);
}

double loglik_at(const FitResult& fit, const MixtureState& state) {
  const auto& c = fit.config;
  const MixtureDensity mix(c.model, state, DispConfig{c.int_displ}, QrndConfig{c.n_qrnd});
  const TrigData trig(fit.data);
  double s = 0.0;
  for (std::size_t i = 0; i < trig.size(); ++i) s += mix.logpdf(trig, i);
  return s;
}

double max_loglik(const FitResult& fit) {
  require_draws(fit);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& ch : fit.chains)
    for (const auto& d : ch.draws) best = std::max(best, d.loglik);
  return best;
}

}  // namespace torusmix
