#pragma once

#include <cmath>

namespace rdmi {

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.70710678118654752440); }

double norm_quantile(double p);

// Regularized incomplete beta I_x(a, b).
double ibeta(double a, double b, double x);

double t_cdf(double t, double df);
double t_sf(double t, double df);
double t_pdf(double t, double df);
double t_quantile(double p, double df);  // df = infinity falls back to the normal quantile

// Half-up rounding of nonnegative selection targets.
inline long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

}  // namespace rdmi
