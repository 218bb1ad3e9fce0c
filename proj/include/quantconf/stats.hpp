#pragma once

#include <cstddef>
#include <span>

namespace quantconf {

struct PairedTestResult {
    std::size_t n = 0;
    double mean_diff = 0.0;
    double t_stat = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    bool significant = false;
    double alpha = 0.05;
    // Zero-variance differences with a nonzero mean: t is infinite, p = 0.
    bool degenerate = false;
};

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction
// (tolerance 1e-14, at most 300 iterations).
double incomplete_beta(double a, double b, double x);

// Student-t CDF and two-sided tail probability P(|T| >= |t|).
double student_t_cdf(double t, double df);
double student_t_two_sided(double t, double df);

// Two-sided paired t-test on d = a - b.
PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                               double alpha = 0.05);

}  // namespace quantconf
