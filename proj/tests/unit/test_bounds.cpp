#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "knife/bounds.hpp"
#include "knife/quadrature.hpp"
#include "knife/synth.hpp"

using namespace knife;

namespace {

BoundInputs base_inputs(int dim = 1, double lipschitz = 0.01) {
  BoundInputs b;
  b.dim = dim;
  b.lipschitz = lipschitz;
  b.n = b.m = b.w = 1.0;
  return with_constants(b);
}

BoundInputs at(BoundInputs b, double n, double m, double w, double delta = 0.05) {
  b.n = n;
  b.m = m;
  b.w = w;
  b.delta = delta;
  return b;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Unit pieces so the adaptive rule cannot stop on a flat start.
double integrate_tail(const std::function<double(double)>& f, double hi) {
  double s = 0.0;
  for (double a = 0.0; a < hi; a += 1.0) s += integrate(f, a, a + 1.0, 1e-13);
  return s;
}

}  // namespace

TEST_CASE("derived constants") {
  const KernelConstants two = derived_constants(2.0, 1);
  CHECK(two.p_max == 1.0);
  CHECK(two.c1 == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-14));
  CHECK(two.c1 == doctest::Approx(0.5413).epsilon(1e-4));
  const KernelConstants small = derived_constants(0.1, 1);
  CHECK(small.p_max == 0.05);
  CHECK(small.c1 == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-14));
  CHECK(small.k_max == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  // Large L: the p log^2 p branch wins.
  const KernelConstants big = derived_constants(40.0, 1);
  CHECK(big.c1 == doctest::Approx(20.0 * std::pow(std::log(20.0), 2)).epsilon(1e-14));
  CHECK_THROWS_AS(derived_constants(1.0, 1, KernelId::epanechnikov), UnsupportedKernelError);
}

TEST_CASE("C2 matches quadrature of L * E|u|") {
  const double L = 0.7;
  // Gaussian, Euclidean norm: d = 1 and d = 2 by direct integration.
  const double e1 = 2.0 * integrate_tail([](double u) { return u * phi(u); }, 12.0);
  CHECK(derived_constants(L, 1).c2 == doctest::Approx(L * e1).epsilon(1e-9));
  const double e2 = integrate_tail([](double r) { return r * r * std::exp(-0.5 * r * r); }, 12.0);
  CHECK(derived_constants(L, 2).c2 == doctest::Approx(L * e2).epsilon(1e-9));
  CHECK(e2 == doctest::Approx(std::sqrt(std::numbers::pi / 2.0)).epsilon(1e-10));
  // Truncated Gaussian on [-1/2, 1/2]^d, l1 norm.
  const double z = integrate(phi, -0.5, 0.5, 1e-13);
  const double abs_mean = 2.0 * integrate([](double u) { return u * phi(u); }, 0.0, 0.5, 1e-13) / z;
  for (int d : {1, 3}) {
    const KernelConstants t = derived_constants(L, d, KernelId::truncated_gaussian);
    CHECK(t.c2 == doctest::Approx(L * d * abs_mean).epsilon(1e-10));
    CHECK(t.k_max == doctest::Approx(std::pow(phi(0.0) / z, d)).epsilon(1e-12));
  }
}

TEST_CASE("epsilon bound") {
  SUBCASE("infeasible region") {
    const BoundValue v = epsilon_bound(at(base_inputs(2), 100, 10, 0.01));
    CHECK_FALSE(v.feasible);
    CHECK(v.log_argument <= 0.0);
    CHECK(std::isinf(v.epsilon));
  }
  SUBCASE("terms add up") {
    const BoundInputs b = at(base_inputs(), 1e5, 1e25, std::pow(1e5, -1.1));
    const BoundValue v = epsilon_bound(b);
    REQUIRE(v.feasible);
    const double sampling = 3.0 * b.n * b.k_max / (std::pow(b.w, b.dim) * b.delta) *
                            std::sqrt(std::log(6.0 * b.n / b.delta) / (2.0 * b.m));
    const double bias = 3.0 * b.n * b.c2 * b.w / b.delta;
    CHECK(v.sampling_term == doctest::Approx(sampling).epsilon(1e-12));
    CHECK(v.bias_term == doctest::Approx(bias).epsilon(1e-12));
    CHECK(v.log_argument == doctest::Approx(1.0 - sampling - bias).epsilon(1e-12));
    CHECK(v.epsilon == doctest::Approx(-std::log(1.0 - sampling - bias) + std::sqrt(3.0 * b.c1 / (b.n * b.delta)))
                           .epsilon(1e-12));
  }
  SUBCASE("flagged infeasible exactly when the log argument is not positive") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int feasible = 0;
    for (int i = 0; i < 10000; ++i) {
      const BoundInputs b = at(base_inputs(1 + i % 3), std::pow(10.0, 1 + 5 * u(rng)), std::pow(10.0, 30 * u(rng)),
                               std::pow(10.0, -6 * u(rng)), 0.01 + 0.9 * u(rng));
      const BoundValue v = epsilon_bound(b);
      CHECK(v.feasible == (v.log_argument > 0.0));
      CHECK(std::isinf(v.epsilon) == !v.feasible);
      feasible += v.feasible;
    }
    CHECK(feasible > 100);
  }
  SUBCASE("halving delta raises epsilon") {
    const BoundInputs b = at(base_inputs(), 1e5, 1e25, std::pow(1e5, -1.1));
    BoundInputs half = b;
    half.delta /= 2.0;
    CHECK(epsilon_bound(half).epsilon > epsilon_bound(b).epsilon);
  }
  SUBCASE("nonincreasing in M") {
    double prev = INFINITY;
    for (double m : {1e22, 1e23, 1e24, 1e26, 1e30}) {
      const double e = epsilon_bound(at(base_inputs(), 1e5, m, std::pow(1e5, -1.1))).epsilon;
      CHECK(e <= prev);
      prev = e;
    }
  }
  SUBCASE("blows up at the feasibility boundary") {
    // Bisect on log10 M for the boundary, then approach it from above.
    BoundInputs b = at(base_inputs(), 1e5, 1.0, std::pow(1e5, -1.1));
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
      b.m = std::pow(10.0, 0.5 * (lo + hi));
      (epsilon_bound(b).feasible ? hi : lo) = 0.5 * (lo + hi);
    }
    double prev = 0.0;
    for (double gap : {1.0, 1e-2, 1e-4, 1e-6, 1e-9}) {
      b.m = std::pow(10.0, hi + gap);
      const BoundValue v = epsilon_bound(b);
      REQUIRE(v.feasible);
      CHECK(v.epsilon > prev);
      prev = v.epsilon;
    }
    CHECK(prev > 15.0);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(epsilon_bound(at(base_inputs(), 100, 10, 0.0)), ParameterError);
    CHECK_THROWS_AS(epsilon_bound(at(base_inputs(), 100, 10, 0.1, 1.0)), ParameterError);
    CHECK_THROWS_AS(epsilon_bound(at(base_inputs(), 0, 10, 0.1)), ParameterError);
  }
}

TEST_CASE("schedule w = N^-1.1, M = N^5") {
  const auto points = scan_schedule(log_space(1e2, 1e6, 9), -1.1, 5.0, base_inputs());
  REQUIRE(points.size() == 9);
  CHECK(points.front().inputs.n == doctest::Approx(100.0));
  CHECK(points.back().inputs.n == doctest::Approx(1e6));
  double prev = INFINITY;
  int feasible = 0;
  for (const SchedulePoint& p : points) {
    CHECK(p.inputs.m == doctest::Approx(std::pow(p.inputs.n, 5.0)).epsilon(1e-12));
    CHECK(p.inputs.w == doctest::Approx(std::pow(p.inputs.n, -1.1)).epsilon(1e-12));
    CHECK(p.value.epsilon <= prev);
    if (p.value.feasible && std::isfinite(prev)) CHECK(p.value.epsilon < prev);
    prev = p.value.epsilon;
    feasible += p.value.feasible;
    // The printed limit conditions: N w and N^2 log N / (w^2d M) both shrink.
    CHECK(p.limits.n_w == doctest::Approx(p.inputs.n * p.inputs.w).epsilon(1e-12));
    CHECK(p.limits.sampling_ratio ==
          doctest::Approx(p.inputs.n * p.inputs.n * std::log(p.inputs.n) / (std::pow(p.inputs.w, 2) * p.inputs.m))
              .epsilon(1e-12));
  }
  CHECK(feasible >= 3);
  for (std::size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].limits.n_w < points[i - 1].limits.n_w);
    CHECK(points[i].limits.sampling_ratio < points[i - 1].limits.sampling_ratio);
  }
}

TEST_CASE("pointwise lemma") {
  const double k = 0.4, c2 = 0.05;
  CHECK(lemma_p_phat_bound(1e4, 0.1, 1, 0.05, k, c2) < lemma_p_phat_bound(1e3, 0.1, 1, 0.05, k, c2));
  CHECK(lemma_p_phat_bound(1e4, 0.1, 2, 1.0, k, c2) ==
        doctest::Approx(c2 * 0.1 + k * std::sqrt(std::log(2.0) / 2e4) / 0.01).epsilon(1e-14));
  // The bound's inner terms are the lemma at delta / (3N), scaled by 3N / delta.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    BoundInputs b = base_inputs(1 + i % 4, 0.01 + u(rng));
    b = at(b, std::pow(10.0, 1 + 4 * u(rng)), std::pow(10.0, 40 * u(rng)), std::pow(10.0, -3 * u(rng)),
           0.01 + 0.9 * u(rng));
    const BoundValue v = epsilon_bound(b);
    const double lemma = lemma_p_phat_bound(b.m, b.w, b.dim, b.delta / (3.0 * b.n), b.k_max, b.c2);
    CHECK(3.0 * b.n / b.delta * lemma == doctest::Approx(v.sampling_term + v.bias_term).epsilon(1e-11));
  }
}

TEST_CASE("log inequality holds on random trials") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = 1e-3 + (1.0 - 2e-3) * u(rng);
    const double delta = a * u(rng) * 0.999;
    const double y = a + (1.0 - a) * u(rng) * u(rng) * 5.0;
    const double x = y + delta * (2.0 * u(rng) - 1.0);
    if (std::abs(std::log(x) - std::log(y)) > log_ineq_bound(a, delta) * (1.0 + 1e-12)) ++violations;
  }
  CHECK(violations == 0);
  CHECK(log_ineq_bound(0.5, 0.25) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("low-density mass of a triangle on [0, 1]") {
  const TriangleMixtureSpec tri{{1.0}, {1.0}, 1};
  const Dataset d = sample_triangle_mixture(tri, 200000, 6);
  for (double a : {0.01, 0.1, 0.5}) {
    double below = 0.0;
    for (Eigen::Index n = 0; n < d.samples.rows(); ++n)
      if (triangle_mixture_pdf_1d(tri, d.samples(n, 0)) <= a) below += 1.0;
    const double frac = below / d.samples.rows();
    CHECK(frac <= a + 3.0 * std::sqrt(a / d.samples.rows()));
    CHECK(frac == doctest::Approx(a * a / 4.0).epsilon(0.1));  // exact value for this triangle
  }
}

TEST_CASE("log-spaced grid") {
  const auto v = log_space(1.0, 1000.0, 4);
  REQUIRE(v.size() == 4);
  CHECK(v[1] == doctest::Approx(10.0));
  CHECK(v[3] == 1000.0);
  CHECK(log_space(5.0, 5.0, 1) == std::vector<double>{5.0});
}
