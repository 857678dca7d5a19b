#include "torusmix/model.hpp"

#include <numeric>

namespace torusmix {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::WN: return "wnorm";
    case ModelKind::VM: return "vm";
    case ModelKind::WN2: return "wnorm2";
    case ModelKind::VMSIN: return "vmsin";
    case ModelKind::VMCOS: return "vmcos";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "wnorm" || name == "wn" || name == "WN") return ModelKind::WN;
  if (name == "vm" || name == "VM") return ModelKind::VM;
  if (name == "wnorm2" || name == "wn2" || name == "WN2") return ModelKind::WN2;
  if (name == "vmsin" || name == "VMSIN") return ModelKind::VMSIN;
  if (name == "vmcos" || name == "VMCOS") return ModelKind::VMCOS;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::vector<std::string> param_names(ModelKind kind) {
  if (data_dim(kind) == 1) return {"kappa", "mu"};
  return {"kappa1", "kappa2", "kappa3", "mu1", "mu2"};
}

double ComponentParams::get(ModelKind kind, int index) const {
  if (data_dim(kind) == 1) {
    switch (index) {
      case 0: return kappa1;
      case 1: return mu1;
    }
  } else {
    switch (index) {
      case 0: return kappa1;
      case 1: return kappa2;
      case 2: return kappa3;
      case 3: return mu1;
      case 4: return mu2;
    }
  }
  throw DomainError("parameter index out of range");
}

void ComponentParams::set(ModelKind kind, int index, double value) {
  if (data_dim(kind) == 1) {
    switch (index) {
      case 0: kappa1 = value; return;
      case 1: mu1 = value; return;
    }
  } else {
    switch (index) {
      case 0: kappa1 = value; return;
      case 1: kappa2 = value; return;
      case 2: kappa3 = value; return;
      case 3: mu1 = value; return;
      case 4: mu2 = value; return;
    }
  }
  throw DomainError("parameter index out of range");
}

bool is_unimodal(ModelKind kind, const ComponentParams& p) {
  switch (kind) {
    case ModelKind::VMSIN:
      return p.kappa3 * p.kappa3 < p.kappa1 * p.kappa2;
    case ModelKind::VMCOS: {
      const double s = p.kappa1 + p.kappa2;
      if (s == 0.0) return p.kappa3 >= 0.0;
      return p.kappa3 >= -p.kappa1 * p.kappa2 / s;
    }
    default:
      return true;
  }
}

void validate_params(ModelKind kind, const ComponentParams& p, bool unimodal) {
  const bool finite = std::isfinite(p.mu1) && std::isfinite(p.mu2) && std::isfinite(p.kappa1) &&
                      std::isfinite(p.kappa2) && std::isfinite(p.kappa3);
  if (!finite) throw DomainError("non-finite parameter");
  if (p.kappa1 < 0.0) throw DomainError("kappa1 must be non-negative");
  if (data_dim(kind) == 2 && p.kappa2 < 0.0) throw DomainError("kappa2 must be non-negative");
  if (kind == ModelKind::WN2 && p.kappa1 * p.kappa2 - p.kappa3 * p.kappa3 < 0.0)
    throw ConstraintError("wnorm2 requires kappa1*kappa2 - kappa3^2 >= 0");
  if (unimodal && !is_unimodal(kind, p))
    throw ConstraintError("component is outside the unimodality region");
}

void validate_state(const MixtureState& state) {
  if (state.comps.empty()) throw DomainError("mixture needs at least one component");
  if (state.comps.size() != state.pmix.size())
    throw DomainError("pmix length differs from number of components");
  double total = 0.0;
  for (double w : state.pmix) {
    if (!(w >= 0.0)) throw DomainError("mixing proportions must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixing proportions must sum to 1");
}

AngleData::AngleData(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
  if (dim_ != 1 && dim_ != 2) throw DataError("angle data must have 1 or 2 columns");
  if (values_.size() % dim_ != 0) throw DataError("ragged angle data");
}

std::vector<double> AngleData::column(int c) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values_[i * dim_ + c];
  return out;
}

void AngleData::push_back(std::span<const double> row) {
  if (static_cast<int>(row.size()) != dim_) throw DataError("row dimension mismatch");
  values_.insert(values_.end(), row.begin(), row.end());
}

}  // namespace torusmix
