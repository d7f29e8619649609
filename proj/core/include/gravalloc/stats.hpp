#pragma once

#include <cstdint>
#include <vector>

namespace gravalloc {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for a binomial proportion (95% by default).
Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z = 1.959963984540054);

struct KsResult {
  double statistic = 0.0;  ///< sup |F_a - F_b|
  double p_value = 1.0;
};
/// Two-sample Kolmogorov-Smirnov test (asymptotic distribution with the
/// effective-sample-size correction of Stephens).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Kolmogorov survival function Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2).
double kolmogorov_q(double x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  ///< unbiased

/// Exact P(X >= t) and P(X <= t) for X ~ Poisson(lambda), real t.
double poisson_upper_tail(double lambda, double t);
double poisson_lower_tail(double lambda, double t);

}  // namespace gravalloc
