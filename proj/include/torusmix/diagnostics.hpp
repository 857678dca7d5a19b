// Convergence diagnostics: Geweke z-scores, sample extraction and
// acceptance-rate summaries.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "torusmix/mcmc.hpp"

namespace torusmix {

// Long-run variance of a series by non-overlapping batch means with
// floor(sqrt(n)) batches.
double batch_means_variance(std::span<const double> x);

// Difference of the means of the first frac1 and last frac2 of the series
// over its batch-means standard error.
double geweke_z(std::span<const double> series, double frac1 = 0.1, double frac2 = 0.5);

struct GewekeEntry {
  std::string parameter;
  int component = 0;  // 1-based
  int chain_id = 0;
  double z = 0.0;     // NaN when a segment has zero variance
};

struct GewekeReport {
  double frac1 = 0.1;
  double frac2 = 0.5;
  std::vector<GewekeEntry> entries;
};

GewekeReport geweke_report(const FitResult& fit, double frac1 = 0.1, double frac2 = 0.5);

// Selected draws as a dense array indexed [chain][draw][parameter][component].
struct SampleArray {
  std::vector<std::string> parameters;
  std::vector<int> components;  // 1-based
  std::vector<int> chain_ids;
  std::vector<std::vector<int>> iterations;  // per chain
  std::vector<double> values;

  std::size_t draws(std::size_t chain) const { return iterations[chain].size(); }
  double at(std::size_t chain, std::size_t draw, std::size_t param, std::size_t comp) const;
};

SampleArray extract_samples(const FitResult& fit, std::span<const std::string> parameters,
                            std::span<const int> components, std::span<const int> chain_ids);

// Every parameter, component and chain.
SampleArray extract_samples(const FitResult& fit);

struct AcceptanceRates {
  int chain_id = 0;
  std::vector<double> rate;  // per component over retained draws
};

std::vector<AcceptanceRates> acceptance_summary(const FitResult& fit);

}  // namespace torusmix
