#pragma once

#include <vector>

#include "knife/density.hpp"

namespace knife {

/// Inputs of the finite-sample confidence bound for a Parzen estimate on
/// [0,1]^d with N evaluation samples, M kernel centers and bandwidth w.
struct BoundInputs {
  double n = 0.0;
  double m = 0.0;
  double w = 0.0;
  int dim = 1;
  double delta = 0.05;
  double lipschitz = 1.0;
  double k_max = 0.0;  // sup of the kernel
  double c1 = 0.0;     // bound on int p log^2 p
  double c2 = 0.0;     // L * int |u| kappa(u) du
  void validate() const;
};

struct BoundValue {
  bool feasible = false;
  double epsilon = 0.0;        // +inf when infeasible
  double log_argument = 0.0;   // 1 - sampling_term - bias_term
  double sampling_term = 0.0;  // 3 N K / (w^d delta) * sqrt(log(6N/delta) / (2M))
  double bias_term = 0.0;      // 3 N C2 w / delta
  double variance_term = 0.0;  // sqrt(3 C1 / (N delta))
};

/// Infeasibility is a value: feasible == false iff log_argument <= 0.
BoundValue epsilon_bound(const BoundInputs& b);

struct KernelConstants {
  double p_max = 0.0;  // bound on sup p, L/2
  double c1 = 0.0;
  double c2 = 0.0;
  double k_max = 0.0;
};

/// Analytic constants for a density with Lipschitz constant L on [0,1]^d.
/// gaussian: standard normal kernel with the Euclidean norm in C2.
/// truncated_gaussian: product of N(0,1) truncated to [-1/2, 1/2]; C2 uses
/// the l1 norm, which upper-bounds the Euclidean one.
/// Other kernels throw UnsupportedKernelError.
KernelConstants derived_constants(double lipschitz, int dim, KernelId kernel = KernelId::gaussian);

/// Fills k_max, c1 and c2 of `b` from derived_constants().
BoundInputs with_constants(BoundInputs b, KernelId kernel = KernelId::gaussian);

/// Pointwise deviation |p(x0) - p_hat(x0)| that holds with probability 1 - delta:
/// K / w^d * sqrt(log(2/delta) / (2M)) + C2 w.
double lemma_p_phat_bound(double m, double w, int dim, double delta, double k_max, double c2);

/// -log(1 - delta/a), the bound on |log x - log y| when y >= a and |x - y| <= delta < a < 1.
double log_ineq_bound(double a, double delta);

/// The two limits that drive epsilon to zero: N w and N^2 log N / (w^(2d) M).
struct ScheduleLimits {
  double n_w = 0.0;
  double sampling_ratio = 0.0;
};
ScheduleLimits schedule_limits(double n, double m, double w, int dim);

/// w = N^w_exponent, M = N^m_exponent for each N in `ns`.
struct SchedulePoint {
  BoundInputs inputs;
  BoundValue value;
  ScheduleLimits limits;
};
std::vector<SchedulePoint> scan_schedule(const std::vector<double>& ns, double w_exponent, double m_exponent,
                                         const BoundInputs& base);

// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t count);

}  // namespace knife
