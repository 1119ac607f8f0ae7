#include "knife/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "knife/errors.hpp"

namespace knife {

void BoundInputs::validate() const {
  if (!(n > 0.0 && m > 0.0 && w > 0.0)) throw ParameterError("N, M and w must be positive");
  if (dim < 1) throw ParameterError("dimension must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (!(lipschitz > 0.0 && k_max > 0.0 && c1 >= 0.0 && c2 >= 0.0))
    throw ParameterError("bound constants must be positive");
}

BoundValue epsilon_bound(const BoundInputs& b) {
  b.validate();
  BoundValue v;
  // w^d in log space: w = N^-1.1 at large d underflows otherwise.
  const double log_wd = b.dim * std::log(b.w);
  v.sampling_term = 3.0 * b.n * b.k_max / b.delta * std::exp(-log_wd) *
                    std::sqrt(std::log(6.0 * b.n / b.delta) / (2.0 * b.m));
  v.bias_term = 3.0 * b.n * b.c2 * b.w / b.delta;
  v.variance_term = std::sqrt(3.0 * b.c1 / (b.n * b.delta));
  v.log_argument = 1.0 - v.sampling_term - v.bias_term;
  v.feasible = v.log_argument > 0.0;
  v.epsilon = v.feasible ? -std::log(v.log_argument) + v.variance_term : std::numeric_limits<double>::infinity();
  return v;
}

KernelConstants derived_constants(double lipschitz, int dim, KernelId kernel) {
  if (!(lipschitz > 0.0)) throw ParameterError("Lipschitz constant must be positive");
  if (dim < 1) throw ParameterError("dimension must be at least 1");
  KernelConstants k;
  k.p_max = lipschitz / 2.0;
  const double lp = std::log(k.p_max);
  k.c1 = std::max(k.p_max * lp * lp, 4.0 * std::exp(-2.0));
  const double d = dim;
  switch (kernel) {
    case KernelId::gaussian:
      k.k_max = std::pow(2.0 * std::numbers::pi, -d / 2.0);
      // E|u| of a standard normal in d dimensions.
      k.c2 = lipschitz * std::numbers::sqrt2 * std::exp(std::lgamma((d + 1.0) / 2.0) - std::lgamma(d / 2.0));
      break;
    case KernelId::truncated_gaussian: {
      const double z = std::erf(0.5 / std::numbers::sqrt2);
      const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      const double phi_half = phi0 * std::exp(-0.125);
      k.k_max = std::pow(phi0 / z, d);
      k.c2 = lipschitz * d * 2.0 * (phi0 - phi_half) / z;
      break;
    }
    default:
      throw UnsupportedKernelError("no closed-form bound constants for this kernel");
  }
  return k;
}

BoundInputs with_constants(BoundInputs b, KernelId kernel) {
  const KernelConstants k = derived_constants(b.lipschitz, b.dim, kernel);
  b.k_max = k.k_max;
  b.c1 = k.c1;
  b.c2 = k.c2;
  return b;
}

double lemma_p_phat_bound(double m, double w, int dim, double delta, double k_max, double c2) {
  if (!(m > 0.0 && w > 0.0 && delta > 0.0 && delta <= 1.0 && k_max > 0.0 && c2 >= 0.0) || dim < 1)
    throw ParameterError("invalid lemma arguments");
  return k_max * std::exp(-dim * std::log(w)) * std::sqrt(std::log(2.0 / delta) / (2.0 * m)) + c2 * w;
}

double log_ineq_bound(double a, double delta) {
  if (!(a > 0.0 && a < 1.0 && delta >= 0.0 && delta < a)) throw ParameterError("need 0 <= delta < a < 1");
  return -std::log1p(-delta / a);
}

ScheduleLimits schedule_limits(double n, double m, double w, int dim) {
  return {n * w, n * n * std::log(n) * std::exp(-2.0 * dim * std::log(w)) / m};
}

std::vector<SchedulePoint> scan_schedule(const std::vector<double>& ns, double w_exponent, double m_exponent,
                                         const BoundInputs& base) {
  std::vector<SchedulePoint> out;
  for (double n : ns) {
    SchedulePoint p;
    p.inputs = base;
    p.inputs.n = n;
    p.inputs.w = std::pow(n, w_exponent);
    p.inputs.m = std::pow(n, m_exponent);
    p.value = epsilon_bound(p.inputs);
    p.limits = schedule_limits(n, p.inputs.m, p.inputs.w, p.inputs.dim);
    out.push_back(p);
  }
  return out;
}

std::vector<double> log_space(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) throw ParameterError("invalid log-space range");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo);
  const double step = (std::log10(hi) - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::pow(10.0, a + step * static_cast<double>(i));
  return out;
}

}  // namespace knife
