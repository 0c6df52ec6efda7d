#pragma once

namespace ssmnar {

// Regularized lower/upper incomplete gamma functions P(a, x) and Q(a, x),
// series expansion for x < a + 1 and Lentz continued fraction otherwise.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Survival function of the chi-squared distribution with d degrees of
// freedom: Q(d/2, x/2).
double chi2_sf(double x, int d);

}  // namespace ssmnar
