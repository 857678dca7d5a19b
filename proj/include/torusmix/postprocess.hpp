// Operations on a finished fit: chain subsetting, extra burn-in and thinning,
// label-switching repair, point and interval estimates, latent allocation
// and the fitted mixture's density and random draws.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "torusmix/mcmc.hpp"
#include "torusmix/sampling.hpp"

namespace torusmix {

// Parameter names of a fit: the model's parameters followed by "pmix".
std::vector<std::string> fit_param_names(ModelKind kind);

// Value of a named parameter of component `comp` (0-based).
double param_value(ModelKind kind, const MixtureState& state, const std::string& name, std::size_t comp);

// Drop the leading floor(extra_burnin_prop * N) draws of every chain, then
// keep every extra_thin-th remaining draw.
FitResult add_burnin_thin(const FitResult& fit, double extra_burnin_prop, int extra_thin);

// Keep the listed chains (1-based ids) in the given order.
FitResult select_chains(const FitResult& fit, std::span<const int> chain_ids);

struct RelabelReport {
  // perms[chain][draw]: new component k is the old component perms[..][k].
  std::vector<std::vector<std::vector<int>>> perms;
  int sweeps = 0;
  bool converged = true;
};

// KL relabeling on membership-probability matrices: per chain, alternate a
// Hungarian assignment per draw against the average matrix and re-averaging,
// then align every chain to chain 1. The first draw of chain 1 keeps its
// labels.
FitResult fix_label(const FitResult& fit, RelabelReport* report = nullptr);

// Minimum-cost assignment for a square cost matrix (row-major k x k):
// returns col[row].
std::vector<int> hungarian(std::span<const double> cost, std::size_t k);

enum class Reducer { MEAN, MODE };

Reducer parse_reducer(std::string_view name);
std::string_view to_string(Reducer r);

MixtureState pointest(const FitResult& fit, Reducer reducer = Reducer::MEAN);

// Custom reducer applied to the pooled draws of every scalar parameter;
// mixing proportions are renormalized afterwards.
MixtureState pointest(const FitResult& fit, const std::function<double(std::span<const double>)>& reducer);

struct ParamQuantiles {
  std::string parameter;
  int component = 0;  // 1-based
  std::vector<double> values;
};

// Type-7 sample quantiles of each parameter over all retained draws. Mean
// parameters are unwrapped around their circular mean first, so bounds may
// fall outside [0, 2pi).
std::vector<ParamQuantiles> quantiles(const FitResult& fit, std::span<const double> probs);

struct CredibleInterval {
  std::string parameter;
  int component = 0;
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<CredibleInterval> credible_interval(const FitResult& fit, double a = 0.05);

// Type-7 quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);

// Most probable component (1-based) of each observation at the point
// estimate; ties go to the lowest index.
std::vector<int> latent_allocation(const FitResult& fit, Reducer reducer = Reducer::MODE);

double d_fitted(std::span<const double> psi, const FitResult& fit, Reducer reducer = Reducer::MEAN);
MixtureDraw r_fitted(std::size_t n, const FitResult& fit, Reducer reducer, RngStream& rng);

// Log-likelihood of the fit's data under a mixture state.
double loglik_at(const FitResult& fit, const MixtureState& state);

// Maximum recorded log-likelihood over retained draws.
double max_loglik(const FitResult& fit);

}  // namespace torusmix
