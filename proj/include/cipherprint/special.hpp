#pragma once
// Distribution functions used by the statistic panel and calibration.
// Thin wrappers over Boost.Math so every caller agrees on argument conventions.

#include <span>

namespace cipherprint {

double normal_cdf(double x);
// Inverse of the standard normal CDF; p must lie in (0, 1).
double normal_quantile(double p);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi_square_cdf(double x, double df);
double chi_square_quantile(double p, double df);

// Kolmogorov-Smirnov distance between the empirical CDF of values and Uniform(0,1).
double ks_uniform_distance(std::span<const double> values);

}  // namespace cipherprint
