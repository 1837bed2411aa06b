#pragma once

#include <span>

namespace adaptq {

double mean(std::span<const double> xs);
/// Unbiased sample variance; requires at least two values.
double sample_variance(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1],
/// evaluated by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  bool significant = false;
  /// Both samples constant: t is 0 (equal means) or infinite (unequal means).
  bool degenerate = false;
};

/// Pooled-variance two-sample Student's t-test, two-sided. Throws
/// std::invalid_argument when either sample has fewer than two values.
TTestResult two_sample_t_test(std::span<const double> a, std::span<const double> b,
                              double alpha = 0.05);

}  // namespace adaptq
