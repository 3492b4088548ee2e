#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ktree {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Upper tail P(X > x) of the chi-square distribution with df degrees of
// freedom (regularized incomplete gamma Q(df/2, x/2)).
double chi_square_tail(double x, double df);

// Limiting Kolmogorov distribution tail: P(sup > lambda).
double kolmogorov_tail(double lambda);

using Matrix = std::vector<std::vector<double>>;

// Pearson goodness of fit of observed counts against a theoretical pmf.
// Cells are pooled in order until every expected count reaches 5.
TestResult chi_square_gof(std::span<const double> counts, std::span<const double> pmf);

// Two-sample homogeneity test on parallel count vectors (same pooling rule,
// applied to both groups' expected counts).
TestResult chi_square_counts(std::span<const double> counts_a, std::span<const double> counts_b);

// Matrix front ends; rows are flattened in order.
TestResult chi_square_transitions(const Matrix& counts_a, const Matrix& counts_b);
TestResult chi_square_transitions_vs_pmf(const Matrix& counts, const Matrix& pmf);

// One-sample Kolmogorov-Smirnov against an analytic CDF; asymptotic p-value.
TestResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

// Two-sample Kolmogorov-Smirnov; asymptotic p-value at the effective sample
// size n_a n_b / (n_a + n_b).
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double mean_of(std::span<const double> xs);
double sample_sd(std::span<const double> xs);
double median_of(std::vector<double> xs); // by copy; nth_element inside

} // namespace ktree
