// The fitting engine: priors, Gibbs allocation, HMC and random-walk
// Metropolis component updates, tuning, permutation sampling, k-means
// initialization and multi-chain orchestration.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "torusmix/densities.hpp"
#include "torusmix/model.hpp"
#include "torusmix/rng.hpp"

namespace torusmix {

enum class Method { HMC, RWMH };
enum class CovRestrict { NONE, ZERO, POSITIVE, NEGATIVE };

std::string_view to_string(Method m);
std::string_view to_string(CovRestrict c);
Method parse_method(std::string_view name);
CovRestrict parse_cov_restrict(std::string_view name);

struct PriorSpec {
  double norm_var = 1000.0;
  // Dirichlet concentration: empty for the default, one value for a common
  // scalar, or one value per component.
  std::vector<double> pmix_alpha;

  std::vector<double> alpha(ModelKind kind, std::size_t ncomp) const;
};

// Truncation of the component parameter space.
struct Support {
  CovRestrict cov_restrict = CovRestrict::NONE;
  bool unimodal = false;
};

// Everything that defines one component's posterior target apart from data.
struct TargetSpec {
  ModelKind kind = ModelKind::VM;
  PriorSpec prior;
  Support support;
  DispConfig disp;
  QrndConfig qrnd;
};

// Normal log-densities on each log kappa and on kappa3; -inf outside the
// support. Constant in the means.
double log_prior(ModelKind kind, const ComponentParams& p, const PriorSpec& spec, const Support& s = {});

// Sum of component log-densities over the indexed points plus log_prior.
double complete_data_lpd(const TargetSpec& spec, const ComponentParams& p, const TrigData& data,
                         std::span<const std::size_t> idx);

// Complete-data log posterior of one component in sampling coordinates
// (log kappa1, log kappa2, kappa3, mu1, mu2), or (log kappa, mu) for
// univariate models. kappa3 is absent under CovRestrict::ZERO.
class ComponentTarget {
 public:
  ComponentTarget(const TargetSpec& spec, const TrigData& data, std::span<const std::size_t> idx);

  int dim() const { return dim_; }
  // True for coordinates that are angles (wrapped after each move).
  bool is_angle(int c) const { return c >= dim_ - data_dim(spec_.kind); }

  std::vector<double> to_coords(const ComponentParams& p) const;
  ComponentParams from_coords(std::span<const double> q) const;

  // Log target; fills grad when given. -inf outside the support.
  double eval(std::span<const double> q, std::span<double> grad = {}) const;

 private:
  const TargetSpec& spec_;
  const TrigData& data_;
  std::span<const std::size_t> idx_;
  int dim_;
  bool has_k3_;
};

struct UpdateResult {
  ComponentParams params;
  bool accepted = false;
  bool divergent = false;     // non-finite target or gradient on the trajectory
  double energy_error = 0.0;  // H(proposal) - H(current), HMC only
};

struct HmcSettings {
  int L = 10;
  double epsilon_jitter = 0.1;
};

UpdateResult hmc_update(const ComponentTarget& target, const ComponentParams& current, double epsilon,
                        const HmcSettings& settings, RngStream& rng);

UpdateResult rwmh_update(const ComponentTarget& target, const ComponentParams& current,
                         std::span<const double> propscale, RngStream& rng);

struct MembershipPass {
  std::vector<double> probs;  // n x K, row-major
  double loglik = 0.0;
};

MembershipPass membership_pass(const MixtureDensity& mix, const TrigData& data);

struct Allocation {
  std::vector<int> labels;  // 0-based
  std::vector<std::size_t> counts;
  std::vector<double> pmix;
};

// Labels from membership probabilities, then pmix ~ Dirichlet(alpha + n).
Allocation allocate(const MembershipPass& pass, std::size_t ncomp, std::span<const double> alpha, RngStream& rng);

Allocation gibbs_allocation(ModelKind kind, const MixtureState& state, const TrigData& data,
                            std::span<const double> alpha, RngStream& rng, const DispConfig& d = {},
                            const QrndConfig& q = {});

struct RunningStat {
  bool circular = false;
  std::size_t n = 0;
  double mean = 0.0, m2 = 0.0, sum_cos = 0.0, sum_sin = 0.0;

  void add(double x);
  double sd() const;
};

struct TuningState {
  Method method = Method::HMC;
  std::vector<double> epsilon;                 // per component
  HmcSettings hmc;
  std::vector<std::vector<double>> propscale;  // per component per coordinate
  std::vector<double> rw_multiplier;           // per component
  std::vector<std::size_t> accept_window;      // per component
  std::size_t window_iters = 0;
  std::vector<std::vector<RunningStat>> coord_stats;  // RWMH: per component per coordinate

  TuningState() = default;
  TuningState(Method m, std::size_t ncomp, int dim, double epsilon0, const HmcSettings& h, double propscale0,
              const std::vector<bool>& angle_coords);
  void record(std::size_t comp, bool accepted, std::span<const double> coords);
};

// Adjust step sizes from the current window and reset it. HMC: x1.1 above
// 90% acceptance, x0.9 below 60%. RWMH: the same factors on a per-component
// multiplier against a 20-30% band, times the running sd of each coordinate.
void autotune(TuningState& t);

// Uniform random relabeling of components, weights, allocations and tuning.
// Returns the permutation: new component k is old component perm[k].
std::vector<int> permute_labels_step(MixtureState& state, std::vector<int>& labels, TuningState* tuning,
                                     RngStream& rng);

// Apply a permutation (new k = old perm[k]) to a state and its labels.
void apply_permutation(MixtureState& state, std::vector<int>& labels, std::span<const int> perm);

// k-means (k-means++ seeding, 50 iterations, 10 restarts) on the unit-circle
// embedding, then per-cluster moment estimates. kappa3 starts at 0.
MixtureState init_kmeans_moment(ModelKind kind, const AngleData& data, std::size_t ncomp, RngStream& rng);

struct FitConfig {
  ModelKind model = ModelKind::VM;
  int ncomp = 1;
  int n_iter = 20000;
  double burnin_prop = 0.5;
  int thin = 1;
  int n_chains = 3;
  Method method = Method::HMC;
  bool perm_sampling = false;
  CovRestrict cov_restrict = CovRestrict::NONE;
  bool unimodal_component = false;
  int int_displ = 3;
  std::size_t n_qrnd = 10000;
  std::uint64_t seed = 1;
  PriorSpec prior;
  double epsilon_init = 0.05;
  int L = 10;
  double epsilon_jitter = 0.1;
  double propscale_init = 0.05;
  int tune_interval = 100;
  bool autotune = true;
  bool keep_allocations = true;

  void validate() const;
  int n_burnin() const;
  TargetSpec target() const;
};

struct Draw {
  int iteration = 0;  // 1-based index in the full chain
  MixtureState state;
  double loglik = 0.0;
  double lpd = 0.0;
  std::vector<std::uint8_t> accepted;  // per component
  std::vector<int> labels;             // 0-based; empty unless kept
};

struct TuneEvent {
  int iteration = 0;
  std::vector<double> accept_rate;  // per component, over the closed window
  std::vector<double> step;         // per component: epsilon or mean propscale
};

struct ChainSamples {
  int chain_id = 0;
  std::vector<Draw> draws;
  std::vector<TuneEvent> tuning;
  std::vector<std::size_t> accepted;  // per component, after burn-in
  std::vector<std::size_t> proposed;
  std::size_t divergent = 0;
};

struct FitResult {
  FitConfig config;
  AngleData data;
  std::vector<ChainSamples> chains;
  std::vector<std::string> warnings;

  std::size_t ncomp() const { return static_cast<std::size_t>(config.ncomp); }
  std::size_t total_draws() const;
};

// Number of worker threads for chains: TORUSMIX_THREADS if set, otherwise
// the hardware concurrency, at least 1.
unsigned chain_threads();

FitResult fit_angmix(const FitConfig& config, const AngleData& data,
                     const std::optional<MixtureState>& start = std::nullopt);

// Log posterior density of a full state up to a constant: log-likelihood,
// component priors and the Dirichlet prior on pmix.
double state_lpd(const FitConfig& config, const MixtureState& state, double loglik);

}  // namespace torusmix
