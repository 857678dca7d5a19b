// Information criteria, pairwise elpd comparison and the incremental search
// over the number of components.
#pragma once

#include <string_view>
#include <vector>

#include "torusmix/mcmc.hpp"

namespace torusmix {

enum class CritKind { WAIC, LOOIC, AIC, BIC, DIC };

std::string_view to_string(CritKind k);
CritKind parse_crit_kind(std::string_view name);

// WAIC and LOOIC report elpd (larger is better); AIC, BIC and DIC report
// their usual deviance-scale values (smaller is better).
struct CritValue {
  CritKind kind = CritKind::WAIC;
  double value = 0.0;
  double elpd = 0.0;                  // WAIC/LOOIC
  std::vector<double> elpd_pointwise;  // WAIC/LOOIC, length n
  double lppd = 0.0;                  // WAIC/LOOIC
  double p_eff = 0.0;                 // default form
  double p_eff_alt = 0.0;             // WAIC: 2 sum(log mean p - mean log p); DIC: Dbar - D(eta_bar)
  double loglik_hat = 0.0;            // AIC/BIC: maximum recorded log-likelihood
  int n_params = 0;                   // AIC/BIC
};

// Value on the smaller-is-better scale.
double oriented(const CritValue& c);

// Log density of every observation under every retained draw: S x n,
// row-major by draw.
struct PointwiseLoglik {
  std::size_t draws = 0;
  std::size_t points = 0;
  std::vector<double> values;

  double at(std::size_t s, std::size_t i) const { return values[s * points + i]; }
};

PointwiseLoglik pointwise_loglik(const FitResult& fit);

CritValue waic(const PointwiseLoglik& ll);
CritValue loo_is(const PointwiseLoglik& ll);
CritValue waic(const FitResult& fit);
CritValue loo_is(const FitResult& fit);

// Free parameters: K * dim(theta) + K - 1, with kappa3 excluded under ZERO.
int n_free_params(const FitConfig& config);

CritValue aic(const FitResult& fit);
CritValue bic(const FitResult& fit);
CritValue dic(const FitResult& fit);

CritValue criterion(const FitResult& fit, CritKind kind);

struct ElpdComparison {
  double elpd_diff = 0.0;  // sum of (b_i - a_i)
  double se_diff = 0.0;
  double z = 0.0;
};

ElpdComparison elpd_compare(const CritValue& a, const CritValue& b);

// Chain with the largest average recorded LPD (1-based id).
int best_chain(const FitResult& fit);

// Standard normal quantile.
double normal_quantile(double p);

// Initial state for K+1 components: the largest-weight component of `prev`
// duplicated, each copy carrying half its weight.
MixtureState split_largest(const MixtureState& prev);

struct IncrementalConfig {
  int start_ncomp = 1;
  int max_ncomp = 10;
  CritKind crit = CritKind::WAIC;
  double alpha = 0.05;
  bool prev_par = true;
  bool use_best_chain = true;
  bool keep_all = false;
};

struct IncrementalResult {
  FitResult fit_best;
  std::vector<int> ncomp_all;
  std::vector<CritValue> crit_all;
  std::vector<double> maxllik_all;
  CritValue crit_best;
  double maxllik_best = 0.0;
  int ncomp_best = 0;
  bool converged = true;
  std::vector<FitResult> fit_all;  // only with keep_all
};

// Fits K = start, start+1, ... For WAIC/LOOIC stops once the one-sided
// z-test of elpd_K >= elpd_{K+1} is not rejected at alpha, keeping K; for
// AIC/BIC/DIC stops at the first local minimum.
IncrementalResult fit_incremental(const FitConfig& config, const AngleData& data, const IncrementalConfig& inc);

}  // namespace torusmix
