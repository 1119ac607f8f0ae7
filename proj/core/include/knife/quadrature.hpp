#pragma once

#include <cmath>
#include <functional>

namespace knife {

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance `tol`.
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-9,
                 int max_depth = 50);

// -p log p with 0 log 0 = 0; densities below 1e-300 contribute nothing.
inline double neg_p_log_p(double p) { return p < 1e-300 ? 0.0 : -p * std::log(p); }

/// -int_a^b p log p.
double entropy_integral(const std::function<double(double)>& pdf, double a, double b, double tol = 1e-9);

}  // namespace knife
