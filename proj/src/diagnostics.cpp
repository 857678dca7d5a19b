#include "torusmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "torusmix/postprocess.hpp"

namespace torusmix {

namespace {

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double batch_means_variance(std::span<const double> x) {
  const std::size_t n = x.size();
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (batches < 2) throw DomainError("series too short for batch means");
  const std::size_t size = n / batches;
  // Batches cover the tail so the most recent draws are always used.
  const std::size_t offset = n - batches * size;
  std::vector<double> bm(batches);
  for (std::size_t b = 0; b < batches; ++b) bm[b] = mean(x.subspan(offset + b * size, size));
  const double m = mean(bm);
  double s = 0.0;
  for (double v : bm) s += (v - m) * (v - m);
  return static_cast<double>(size) * s / static_cast<double>(batches - 1);
}

double geweke_z(std::span<const double> series, double frac1, double frac2) {
  if (!(frac1 > 0.0 && frac1 < 1.0 && frac2 > 0.0 && frac2 < 1.0 && frac1 + frac2 <= 1.0))
    throw DomainError("Geweke fractions must lie in (0, 1) with frac1 + frac2 <= 1");
  const std::size_t n = series.size();
  if (n < 40) throw DomainError("Geweke diagnostic needs at least 40 draws");
  const auto na = static_cast<std::size_t>(std::floor(frac1 * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(frac2 * static_cast<double>(n)));
  const auto a = series.first(na), b = series.last(nb);
  const double va = batch_means_variance(a), vb = batch_means_variance(b);
  const double scale = std::max(1.0, std::abs(mean(series)));
  if (!(va > 1e-28 * scale * scale) || !(vb > 1e-28 * scale * scale))
    throw DegenerateError("zero variance in a Geweke segment");
  return (mean(a) - mean(b)) / std::sqrt(va / static_cast<double>(na) + vb / static_cast<double>(nb));
}

GewekeReport geweke_report(const FitResult& fit, double frac1, double frac2) {
  GewekeReport r{frac1, frac2, {}};
  const auto names = fit_param_names(fit.config.model);
  for (std::size_t j = 0; j < fit.ncomp(); ++j)
    for (const auto& name : names)
      for (const auto& ch : fit.chains) {
        std::vector<double> x;
        x.reserve(ch.draws.size());
        for (const auto& d : ch.draws) x.push_back(param_value(fit.config.model, d.state, name, j));
        double z = std::numeric_limits<double>::quiet_NaN();
        try {
          z = geweke_z(x, frac1, frac2);
        } catch (const DegenerateError&) {
        }
        r.entries.push_back({name, static_cast<int>(j + 1), ch.chain_id, z});
      }
  return r;
}

double SampleArray::at(std::size_t chain, std::size_t draw, std::size_t param, std::size_t comp) const {
  std::size_t base = 0;
  for (std::size_t c = 0; c < chain; ++c) base += iterations[c].size();
  return values[((base + draw) * parameters.size() + param) * components.size() + comp];
}

SampleArray extract_samples(const FitResult& fit, std::span<const std::string> parameters,
                            std::span<const int> components, std::span<const int> chain_ids) {
  if (parameters.empty() || components.empty() || chain_ids.empty()) throw DomainError("empty sample selection");
  const auto names = fit_param_names(fit.config.model);
  for (const auto& p : parameters)
    if (std::find(names.begin(), names.end(), p) == names.end()) throw DomainError("unknown parameter '" + p + "'");
  for (int c : components)
    if (c < 1 || c > fit.config.ncomp) throw DomainError("component out of range");
  const FitResult sel = select_chains(fit, chain_ids);
  SampleArray out;
  out.parameters.assign(parameters.begin(), parameters.end());
  out.components.assign(components.begin(), components.end());
  out.chain_ids.assign(chain_ids.begin(), chain_ids.end());
  for (const auto& ch : sel.chains) {
    std::vector<int> its;
    for (const auto& d : ch.draws) {
      its.push_back(d.iteration);
      for (const auto& p : parameters)
        for (int c : components)
          out.values.push_back(param_value(fit.config.model, d.state, p, static_cast<std::size_t>(c - 1)));
    }
    out.iterations.push_back(std::move(its));
  }
  return out;
}

SampleArray extract_samples(const FitResult& fit) {
  const auto names = fit_param_names(fit.config.model);
  std::vector<int> comps(fit.ncomp()), ids;
  std::iota(comps.begin(), comps.end(), 1);
  for (const auto& ch : fit.chains) ids.push_back(ch.chain_id);
  return extract_samples(fit, names, comps, ids);
}

std::vector<AcceptanceRates> acceptance_summary(const FitResult& fit) {
  std::vector<AcceptanceRates> out;
  for (const auto& ch : fit.chains) {
    AcceptanceRates r{ch.chain_id, std::vector<double>(fit.ncomp(), 0.0)};
    std::vector<std::size_t> n(fit.ncomp(), 0);
    for (const auto& d : ch.draws)
      for (std::size_t j = 0; j < d.accepted.size() && j < fit.ncomp(); ++j) {
        r.rate[j] += d.accepted[j];
        ++n[j];
      }
    for (std::size_t j = 0; j < fit.ncomp(); ++j)
      r.rate[j] = n[j] ? r.rate[j] / static_cast<double>(n[j]) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace torusmix
