#include "knife/quadrature.hpp"

#include <cmath>

#include "knife/errors.hpp"

namespace knife {

namespace {

struct Simpson {
  const std::function<double(double)>& f;
  int max_depth;

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth >= max_depth || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (!(tol > 0.0)) throw ParameterError("quadrature tolerance must be positive");
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, tol, max_depth);
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double result = Simpson{f, max_depth}.recurse(a, b, fa, fm, fb, whole, tol, 0);
  if (!std::isfinite(result)) throw NumericError("quadrature produced a non-finite value", 0);
  return result;
}

double entropy_integral(const std::function<double(double)>& pdf, double a, double b, double tol) {
  return integrate([&](double x) { return neg_p_log_p(pdf(x)); }, a, b, tol);
}

}  // namespace knife
