// Log-densities, normalizing constants and analytic gradients for the five
// component models, plus mixture densities and membership probabilities.
#pragma once

#include <span>
#include <vector>

#include "torusmix/model.hpp"
#include "torusmix/special.hpp"

namespace torusmix {

enum class ConstMethod { Auto, Series, Qmc };

// Reciprocal normalizing constant Cbar of a bivariate von Mises model and
// its partial derivatives, the latter stored as ratios to Cbar.
struct BivariateConstant {
  double log_c = 0.0;
  double d1 = 0.0;   // (dCbar/dk1) / Cbar
  double d2 = 0.0;   // (dCbar/dk2) / Cbar
  double d3 = 0.0;   // (dCbar/dk3) / Cbar
  double d11 = 0.0;  // (d2Cbar/dk1^2) / Cbar
  double d22 = 0.0;
  double d12 = 0.0;  // (d2Cbar/dk1 dk2) / Cbar
  bool used_qmc = false;
};

BivariateConstant vmsin_constant(double k1, double k2, double k3, const QrndConfig& q = {},
                                 ConstMethod method = ConstMethod::Auto);
BivariateConstant vmcos_constant(double k1, double k2, double k3, const QrndConfig& q = {},
                                 ConstMethod method = ConstMethod::Auto);

// Cbar itself (1 / C). Overflows to +inf for very large concentrations; use
// the log_c field of the *_constant functions in that regime.
double vmsin_const(double k1, double k2, double k3, const QrndConfig& q = {});
double vmcos_const(double k1, double k2, double k3, const QrndConfig& q = {});

// True when vmcos_constant in Auto mode takes the quasi-Monte Carlo path.
bool vmcos_uses_qmc(double k1, double k2, double k3);

double wnorm_logpdf(double psi, const ComponentParams& p, const DispConfig& d = {});
double wnorm2_logpdf(std::span<const double> psi, const ComponentParams& p, const DispConfig& d = {});
double vm_logpdf(double psi, const ComponentParams& p);
double vmsin_logpdf(std::span<const double> psi, const ComponentParams& p, const QrndConfig& q = {});
double vmcos_logpdf(std::span<const double> psi, const ComponentParams& p, const QrndConfig& q = {});

// Angle data with cached cosines and sines.
class TrigData {
 public:
  explicit TrigData(const AngleData& data);

  int dim() const { return dim_; }
  std::size_t size() const { return n_; }
  double angle(std::size_t i, int c) const { return angle_[i * dim_ + c]; }
  double cos(std::size_t i, int c) const { return cos_[i * dim_ + c]; }
  double sin(std::size_t i, int c) const { return sin_[i * dim_ + c]; }

 private:
  int dim_;
  std::size_t n_;
  std::vector<double> angle_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

// One component with every parameter-only quantity (normalizing constant,
// its derivatives, trig of the means) evaluated once.
class ComponentDensity {
 public:
  ComponentDensity(ModelKind kind, const ComponentParams& p, const DispConfig& d = {},
                   const QrndConfig& q = {});

  ModelKind kind() const { return kind_; }
  const ComponentParams& params() const { return p_; }
  const BivariateConstant& bivariate_constant() const { return bc_; }

  double logpdf(std::span<const double> psi) const;
  double logpdf(const TrigData& t, std::size_t i) const;

  // Gradient of log f over the free parameters in param_names(kind) order;
  // `out` must hold param_dim(kind) values. Returns log f.
  double logpdf_grad(std::span<const double> psi, std::span<double> out) const;
  double logpdf_grad(const TrigData& t, std::size_t i, std::span<double> out) const;

 private:
  double wn_eval(double psi, double* grad) const;
  double wn2_eval(double psi1, double psi2, double* grad) const;
  double vm_eval(double c, double s, double* grad) const;
  double biv_eval(double c1, double s1, double c2, double s2, double* grad) const;

  ModelKind kind_;
  ComponentParams p_;
  int int_displ_;
  bool uniform_ = false;
  double log_norm_ = 0.0;
  double aux_ = 0.0;  // VM: I1/I0; WN2: kappa1*kappa2 - kappa3^2
  double cmu1_ = 1.0, smu1_ = 0.0, cmu2_ = 1.0, smu2_ = 0.0;
  BivariateConstant bc_;
};

double log_density(ModelKind kind, const ComponentParams& p, std::span<const double> psi,
                   const DispConfig& d = {}, const QrndConfig& q = {});

std::vector<double> grad_log_density(ModelKind kind, const ComponentParams& p,
                                     std::span<const double> psi, const DispConfig& d = {},
                                     const QrndConfig& q = {});

// All components of a mixture prepared for repeated evaluation.
class MixtureDensity {
 public:
  MixtureDensity(ModelKind kind, const MixtureState& state, const DispConfig& d = {},
                 const QrndConfig& q = {});

  std::size_t ncomp() const { return comps_.size(); }
  const ComponentDensity& component(std::size_t j) const { return comps_[j]; }

  double logpdf(std::span<const double> psi) const;
  double logpdf(const TrigData& t, std::size_t i) const;

  // Membership probabilities (normalized p_j f_j); writes ncomp() values.
  // Returns the mixture log-density. Throws DegenerateError when every
  // component density vanishes.
  double membership(std::span<const double> psi, std::span<double> out) const;
  double membership(const TrigData& t, std::size_t i, std::span<double> out) const;

 private:
  double normalize(std::span<double> out) const;

  std::vector<ComponentDensity> comps_;
  std::vector<double> log_pmix_;
};

double mixture_logpdf(ModelKind kind, const MixtureState& state, std::span<const double> psi,
                      const DispConfig& d = {}, const QrndConfig& q = {});

std::vector<double> membership_probs(ModelKind kind, const MixtureState& state,
                                     std::span<const double> psi, const DispConfig& d = {},
                                     const QrndConfig& q = {});

// log-sum-exp over a range; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> v);

}  // namespace torusmix
