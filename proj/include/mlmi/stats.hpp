#pragma once

#include <cstddef>
#include <vector>

// Small numerical helpers shared across modules. Distribution functions are
// implemented in stats.cpp so the Boost.Math dependency stays out of headers.

namespace mlmi {

double normal_cdf(double x);

// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_p_two_sided(double t, double df);

// Upper tail P(X > x) for a chi-squared variable with df degrees of freedom.
double chi_squared_sf(double x, double df);

double mean(const std::vector<double>& v);

// Unbiased sample variance; 0 for fewer than two elements.
double sample_variance(const std::vector<double>& v);

double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b);

// Pearson goodness-of-fit p-value for observed counts against expected
// counts (expected entries must be positive).
double chi_squared_gof_p(const std::vector<double>& observed,
                         const std::vector<double>& expected);

}  // namespace mlmi
