#pragma once

namespace gridres {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom (df > 0).
double student_t_cdf(double t, double df);

/// Two-sided p-value P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

double normal_cdf(double z);

}  // namespace gridres
