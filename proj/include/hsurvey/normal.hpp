#pragma once

namespace hsurvey::normal {

/// Standard normal density.
double pdf(double x);

/// Standard normal CDF, accurate in both tails.
double cdf(double x);

/// Upper tail probability 1 - cdf(x), without cancellation for large x.
double survival(double x);

/// Inverse CDF for p in (0, 1). Absolute error is below 1e-12 over the
/// interior of the domain (rational approximation plus one Halley step).
double quantile(double p);

/// Two-sided critical value: the upper 1 - delta/2 point, delta in (0, 1).
double two_sided_critical(double delta);

}  // namespace hsurvey::normal
