// Circular descriptive statistics: sample estimators and population values
// of the circular mean, variance and the Jammalamadaka-Sarma (JS) and
// Fisher-Lee (FL) circular correlations.
#pragma once

#include <limits>
#include <span>

#include "torusmix/model.hpp"
#include "torusmix/special.hpp"

namespace torusmix {

struct CircSummary {
  double var1 = 0.0;
  double var2 = std::numeric_limits<double>::quiet_NaN();
  double rho_js = std::numeric_limits<double>::quiet_NaN();
  double rho_fl = std::numeric_limits<double>::quiet_NaN();
};

// atan2 of the mean sine and cosine, in [0, 2pi). Throws DegenerateError
// for an empty sample or a zero resultant.
double circ_mean(std::span<const double> sample);

// 1 - mean resultant length. A zero resultant reports 1 and sets
// *zero_resultant when given.
double circ_var(std::span<const double> sample, bool* zero_resultant = nullptr);

// Plug-in JS estimator. Throws DegenerateError on fewer than 3 pairs, an
// undefined marginal mean, or a zero denominator.
double circ_corr_js(std::span<const double> a, std::span<const double> b);

// FL estimator over all distinct pairs, evaluated in O(n) through
// trigonometric moments.
double circ_corr_fl(std::span<const double> a, std::span<const double> b);

// Sample summary of 1- or 2-column data.
CircSummary sample_summary(const AngleData& data);

// Population variance(s) and correlations of one component. Bivariate von
// Mises models use the Cbar derivative series (quasi-Monte Carlo when the
// series is unavailable).
CircSummary model_summary(ModelKind kind, const ComponentParams& p, const QrndConfig& q = {});

}  // namespace torusmix
