// Core value types shared by every torusmix module: model kinds, component
// parameter blocks, mixture states, angle data and the exception hierarchy.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace torusmix {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Invalid argument outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Parameter block violating a model constraint (e.g. WN2 positive definiteness).
class ConstraintError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Input for which the requested quantity is undefined (zero resultant,
// zero denominators, all-zero densities).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or incompatible data (file contents, dimension mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unrecoverable numerical failure.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { WN, VM, WN2, VMSIN, VMCOS };

// Number of angle columns a model consumes (1 or 2).
constexpr int data_dim(ModelKind kind) {
  return (kind == ModelKind::WN || kind == ModelKind::VM) ? 1 : 2;
}

// Number of free parameters per component: (kappa, mu) or
// (kappa1, kappa2, kappa3, mu1, mu2).
constexpr int param_dim(ModelKind kind) { return data_dim(kind) == 1 ? 2 : 5; }

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Names of the free parameters in gradient order.
std::vector<std::string> param_names(ModelKind kind);

// One mixture component. Univariate models use mu1/kappa1 only.
struct ComponentParams {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double kappa3 = 0.0;

  // Value by gradient-order index (see param_names).
  double get(ModelKind kind, int index) const;
  void set(ModelKind kind, int index, double value);

  friend bool operator==(const ComponentParams&, const ComponentParams&) = default;
};

// Throws DomainError/ConstraintError when params are outside the model's
// support. `unimodal` additionally enforces the sine/cosine unimodality region.
void validate_params(ModelKind kind, const ComponentParams& p, bool unimodal = false);

bool is_unimodal(ModelKind kind, const ComponentParams& p);

struct MixtureState {
  std::vector<ComponentParams> comps;
  std::vector<double> pmix;

  std::size_t ncomp() const { return comps.size(); }
};

// Throws DomainError if K == 0, sizes disagree, weights are negative or do
// not sum to one within 1e-12.
void validate_state(const MixtureState& state);

// Wrapped-normal lattice truncation: sum over omega in {-M..M}.
struct DispConfig {
  int int_displ = 3;
};

// n observations of dimension 1 or 2, row-major, each entry in [0, 2pi).
class AngleData {
 public:
  AngleData() = default;
  AngleData(int dim, std::vector<double> values);

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const {
    return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<double> operator[](std::size_t i) {
    return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& values() const { return values_; }

  // Values of one column.
  std::vector<double> column(int c) const;

  void push_back(std::span<const double> row);

 private:
  int dim_ = 1;
  std::vector<double> values_;
};

// Reduce an angle into [0, 2pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace torusmix
