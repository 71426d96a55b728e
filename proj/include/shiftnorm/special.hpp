#pragma once

namespace shiftnorm {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0. Series expansion
// for x < a+1 and continued fraction for the complement at moderate a; for
// a > 100 the integrand is integrated directly with an 18-point
// Gauss-Legendre rule around the peak.
double lower_gamma_regularized(double a, double x);

// Chi-square distribution with df degrees of freedom (df >= 1).
double chi2_cdf(double x, long long df);
double chi2_pdf(double x, long long df);

// Inverse chi-square CDF: returns x with chi2_cdf(x, df) = p to better than
// 1e-10 in CDF space. Bisection bracket followed by Newton polishing.
double chi2_quantile(double p, long long df);

} // namespace shiftnorm
