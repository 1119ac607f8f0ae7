#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "knife/errors.hpp"
#include "knife/quadrature.hpp"
#include "knife/synth.hpp"

using namespace knife;

TEST_CASE("adaptive Simpson") {
  CHECK(integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-10));
  CHECK(integrate([](double x) { return std::abs(x); }, -1.0, 2.0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(neg_p_log_p(0.0) == 0.0);
  CHECK(neg_p_log_p(0.5) == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("Gaussian sampling and entropies") {
  SUBCASE("sample mean") {
    const Dataset d = sample_gauss(GaussianSpec{3, 1.0}, 1000000, 1);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(d.samples.col(k).mean()) < 4.0 / 1000.0);
  }
  SUBCASE("shrinking variance") {
    const GaussianSpec spec{64, 0.5};
    CHECK(gaussian_entropy(10) == doctest::Approx(14.1894).epsilon(1e-5));
    CHECK(gaussian_entropy(64) == doctest::Approx(90.8121).epsilon(1e-6));
    for (std::size_t e = 0; e < 4; ++e)
      CHECK(gaussian_entropy(64, spec.variance(e)) - gaussian_entropy(64, spec.variance(e + 1)) ==
            doctest::Approx(32.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(gaussian_entropy(64, spec.variance(4)) == doctest::Approx(90.8121 - 88.7228).epsilon(1e-4));
    Rng rng = make_rng(2);
    const Matrix x = sample_gauss(spec, 200000, rng, 2);
    CHECK((x.array().square().sum() / x.size()) == doctest::Approx(0.25).epsilon(0.01));
  }
  SUBCASE("spec validation") {
    CHECK_THROWS_AS(GaussianSpec({0, 1.0}).validate(), ParameterError);
    CHECK_THROWS_AS(GaussianSpec({2, 0.0}).validate(), ParameterError);
  }
}

TEST_CASE("correlated Gaussian pairs") {
  const Dataset d = sample_correlated_gauss(2, 0.6, 1000000, 3);
  const Matrix& x = d.samples;
  const Matrix& y = *d.cond;
  for (int k = 0; k < 2; ++k) {
    const double c = (x.col(k).array() * y.col(k).array()).mean();
    const double vx = x.col(k).array().square().mean();
    const double vy = y.col(k).array().square().mean();
    CHECK(std::abs(c / std::sqrt(vx * vy) - 0.6) < 0.01);
  }
  CHECK(gaussian_mi(20, 0.5) == doctest::Approx(2.877).epsilon(1e-3));
  CHECK(gaussian_mi(5, 0.0) == 0.0);
}

TEST_CASE("triangle mixtures") {
  SUBCASE("single triangle") {
    CHECK(integrate([](double x) { return triangle_pdf(x, 0.7); }, -1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
    const TriangleMixtureSpec one{{1.0}, {1.0}, 1};
    CHECK(triangle_entropy(1.0) == doctest::Approx(0.5 - std::log(2.0)).epsilon(1e-14));
    CHECK(std::abs(oracle_entropy_triangle(one) - (0.5 - std::log(2.0))) < 1e-6);
    for (double s : {0.1, 0.35, 0.8}) {
      const TriangleMixtureSpec t{{1.0}, {s}, 1};
      CHECK(std::abs(oracle_entropy_triangle(t) - (0.5 + std::log(s / 2.0))) < 1e-6);
    }
  }
  SUBCASE("disjoint equal-weight pair adds log 2") {
    const TriangleMixtureSpec two{{0.5, 0.5}, {0.6, 0.6}, 1};
    CHECK(std::abs(oracle_entropy_triangle(two) - (triangle_entropy(0.6) + std::log(2.0))) < 1e-6);
  }
  SUBCASE("unequal disjoint mixture decomposes") {
    const TriangleMixtureSpec t{{0.2, 0.3, 0.5}, {0.3, 1.0, 0.7}, 1};
    double h = 0.0;
    for (std::size_t i = 0; i < 3; ++i) h += t.weights[i] * (triangle_entropy(t.scales[i]) - std::log(t.weights[i]));
    CHECK(std::abs(oracle_entropy_triangle(t) - h) < 1e-6);
  }
  SUBCASE("d copies scale the oracle") {
    Rng rng = make_rng(0, 7);
    TriangleMixtureSpec t = random_triangle_spec(2, 8, rng);
    TriangleMixtureSpec one = t;
    one.dim = 1;
    CHECK(oracle_entropy_triangle(t) == doctest::Approx(8.0 * oracle_entropy_triangle(one)).epsilon(1e-12));
    double sum = 0.0;
    for (double w : t.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0));
    for (double s : t.scales) CHECK((s >= 0.1 && s <= 1.0));
  }
  SUBCASE("samples follow the density") {
    const TriangleMixtureSpec t{{0.25, 0.75}, {0.5, 0.9}, 2};
    const Dataset d = sample_triangle_mixture(t, 400000, 4);
    // Mass of the first component and the mean of the second.
    double first = 0.0, second_sum = 0.0;
    for (Eigen::Index n = 0; n < d.samples.rows(); ++n) {
      const double v = d.samples(n, 1);
      if (v < 1.0) first += 1.0;
      else second_sum += v;
    }
    const double n = static_cast<double>(d.samples.rows());
    CHECK(first / n == doctest::Approx(0.25).epsilon(0.02));
    CHECK(second_sum / (n - first) == doctest::Approx(1.5).epsilon(1e-3));
    // Plug-in cross-check of the oracle with the true density.
    double h = 0.0;
    for (Eigen::Index i = 0; i < d.samples.rows(); ++i) h -= std::log(triangle_mixture_pdf_1d(t, d.samples(i, 0)));
    CHECK(std::abs(h / n - oracle_entropy_triangle(TriangleMixtureSpec{t.weights, t.scales, 1})) < 0.01);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS((TriangleMixtureSpec{{0.5, 0.6}, {0.5, 0.5}, 1}.validate()), ParameterError);
    CHECK_THROWS_AS((TriangleMixtureSpec{{1.0}, {1.5}, 1}.validate()), ParameterError);
    CHECK_THROWS_AS((TriangleMixtureSpec{{1.0}, {0.5, 0.5}, 1}.validate()), ParameterError);
  }
}

TEST_CASE("uniform pairs") {
  SUBCASE("unit second moment") {
    const Dataset d = sample_uniform_pair(UniformPairSpec{0.7, 1}, 1000000, 5);
    CHECK(std::abs(d.samples.array().square().mean() - 1.0) < 0.01);
    CHECK(std::abs(d.cond->array().square().mean() - 1.0) < 0.01);
  }
  SUBCASE("sum density integrates to one and matches the closed form") {
    for (double rho : {0.1, 0.5, 0.9}) {
      const double mass = integrate([&](double y) { return uniform_sum_pdf(rho, y); }, -4.0, 4.0, 1e-12);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
      const double a = std::max(rho, std::sqrt(1.0 - rho * rho)) * std::sqrt(3.0);
      const double b = std::min(rho, std::sqrt(1.0 - rho * rho)) * std::sqrt(3.0);
      const double hy = std::log(2.0 * a) + b / (2.0 * a);
      const double hyx = std::log(2.0 * std::sqrt(3.0) * std::sqrt(1.0 - rho * rho));
      CHECK(oracle_mi_uniform(rho) == doctest::Approx(hy - hyx).epsilon(1e-7));
    }
    CHECK(oracle_mi_uniform(0.0) == 0.0);
  }
  SUBCASE("histogram of Y matches the trapezoid") {
    const double rho = 0.9;
    const Dataset d = sample_uniform_pair(UniformPairSpec{rho, 1}, 400000, 6);
    int in_bin = 0;
    for (Eigen::Index n = 0; n < d.cond->rows(); ++n)
      if ((*d.cond)(n, 0) > 0.0 && (*d.cond)(n, 0) < 0.5) ++in_bin;
    const double expected = integrate([&](double y) { return uniform_sum_pdf(rho, y); }, 0.0, 0.5);
    CHECK(in_bin / 400000.0 == doctest::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("target inversion") {
  CHECK(rho_for_target_mi_gauss(0.0, 5) == 0.0);
  CHECK(rho_for_target_mi_gauss(2.0, 20) == doctest::Approx(std::sqrt(1.0 - std::exp(-0.2))).epsilon(1e-14));
  CHECK(rho_for_target_mi_gauss(2.0, 20) == doctest::Approx(0.4258).epsilon(1e-4));
  for (int d : {10, 20}) {
    for (double t : {2.0, 4.0, 8.0}) {
      CHECK(gaussian_mi(d, rho_for_target_mi_gauss(t, d)) == doctest::Approx(t).epsilon(1e-12));
      const double rho = rho_for_target_mi_uniform(t, d);
      CHECK(std::abs(d * oracle_mi_uniform(rho) - t) < 1e-4);
    }
  }
  CHECK(rho_for_target_mi_uniform(0.0, 5) == 0.0);
  CHECK_THROWS_AS(rho_for_target_mi_gauss(-1.0, 5), ParameterError);
}

TEST_CASE("determinism") {
  const Dataset a = sample_triangle_mixture(TriangleMixtureSpec{{1.0}, {0.5}, 3}, 100, 9);
  const Dataset b = sample_triangle_mixture(TriangleMixtureSpec{{1.0}, {0.5}, 3}, 100, 9);
  CHECK(a.samples == b.samples);
  const Dataset c = sample_triangle_mixture(TriangleMixtureSpec{{1.0}, {0.5}, 3}, 100, 10);
  CHECK(a.samples != c.samples);
}
