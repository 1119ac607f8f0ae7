#include "knife/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "knife/errors.hpp"
#include "knife/quadrature.hpp"

namespace knife {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

Dataset paired(PairBatch b) {
  Dataset d;
  d.samples = std::move(b.x);
  d.cond = std::move(b.y);
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussians

void GaussianSpec::validate() const {
  if (dim < 1) throw ParameterError("Gaussian dimension must be at least 1");
  if (!(shrink > 0.0 && shrink <= 1.0)) throw ParameterError("shrink factor must lie in (0, 1]");
}

double GaussianSpec::variance(std::size_t epoch) const { return std::pow(shrink, static_cast<double>(epoch)); }

double gaussian_entropy(int dim, double variance) {
  if (dim < 1 || !(variance > 0.0)) throw ParameterError("invalid Gaussian entropy arguments");
  return 0.5 * dim * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

double gaussian_mi(int dim, double rho) {
  if (dim < 1 || !(rho > -1.0 && rho < 1.0)) throw ParameterError("invalid Gaussian MI arguments");
  return -0.5 * dim * std::log1p(-rho * rho);
}

Matrix sample_gauss(const GaussianSpec& spec, std::size_t n, Rng& rng, std::size_t epoch) {
  spec.validate();
  std::normal_distribution<double> normal(0.0, std::sqrt(spec.variance(epoch)));
  Matrix out(static_cast<Eigen::Index>(n), spec.dim);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

Dataset sample_gauss(const GaussianSpec& spec, std::size_t n, std::uint64_t seed, std::size_t epoch) {
  Rng rng = make_rng(seed);
  return Dataset{sample_gauss(spec, n, rng, epoch), {}, {}};
}

Sampler gauss_sampler(const GaussianSpec& spec) {
  spec.validate();
  return [spec](std::size_t epoch, std::size_t n, Rng& rng) { return sample_gauss(spec, n, rng, epoch); };
}

PairBatch sample_correlated_gauss(int dim, double rho, std::size_t n, Rng& rng) {
  if (dim < 1 || !(rho > -1.0 && rho < 1.0)) throw ParameterError("invalid correlated Gaussian arguments");
  std::normal_distribution<double> normal;
  const double noise = std::sqrt(1.0 - rho * rho);
  PairBatch b{Matrix(static_cast<Eigen::Index>(n), dim), Matrix(static_cast<Eigen::Index>(n), dim)};
  for (Eigen::Index i = 0; i < b.x.size(); ++i) {
    const double x = normal(rng);
    b.x.data()[i] = x;
    b.y.data()[i] = rho * x + noise * normal(rng);
  }
  return b;
}

Dataset sample_correlated_gauss(int dim, double rho, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return paired(sample_correlated_gauss(dim, rho, n, rng));
}

// ---------------------------------------------------------------------------
// Triangle mixtures

void TriangleMixtureSpec::validate() const {
  if (dim < 1) throw ParameterError("triangle mixture dimension must be at least 1");
  if (weights.empty() || weights.size() != scales.size())
    throw ParameterError("triangle mixture needs one weight and one scale per component");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ParameterError("triangle mixture weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("triangle mixture weights must sum to 1");
  for (double s : scales)
    if (!(s >= 0.1 && s <= 1.0)) throw ParameterError("triangle scales must lie in [0.1, 1]");
}

TriangleMixtureSpec random_triangle_spec(std::size_t components, int dim, Rng& rng) {
  if (components < 1) throw ParameterError("need at least one component");
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_real_distribution<double> scale(0.1, 1.0);
  TriangleMixtureSpec spec;
  spec.dim = dim;
  double total = 0.0;
  for (std::size_t i = 0; i < components; ++i) {
    spec.weights.push_back(gamma1(rng));
    total += spec.weights.back();
  }
  for (double& w : spec.weights) w /= total;
  for (std::size_t i = 0; i < components; ++i) spec.scales.push_back(scale(rng));
  spec.validate();
  return spec;
}

double triangle_pdf(double x, double scale) { return std::max(0.0, 2.0 - 4.0 * std::abs(x) / scale) / scale; }

double triangle_mixture_pdf_1d(const TriangleMixtureSpec& spec, double x) {
  double p = 0.0;
  for (std::size_t i = 0; i < spec.components(); ++i) p += spec.weights[i] * triangle_pdf(x - spec.center(i), spec.scales[i]);
  return p;
}

double triangle_entropy(double scale) { return 0.5 + std::log(scale / 2.0); }

Matrix sample_triangle_mixture(const TriangleMixtureSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  std::discrete_distribution<std::size_t> pick(spec.weights.begin(), spec.weights.end());
  std::uniform_real_distribution<double> unit;
  Matrix out(static_cast<Eigen::Index>(n), spec.dim);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const std::size_t c = pick(rng);
    // U1 + U2 - 1 is the unit-half-width triangle.
    const double t = unit(rng) + unit(rng) - 1.0;
    out.data()[i] = spec.center(c) + 0.5 * spec.scales[c] * t;
  }
  return out;
}

Dataset sample_triangle_mixture(const TriangleMixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return Dataset{sample_triangle_mixture(spec, n, rng), {}, {}};
}

double oracle_entropy_triangle(const TriangleMixtureSpec& spec) {
  spec.validate();
  const auto pdf = [&](double x) { return triangle_mixture_pdf_1d(spec, x); };
  // Integrate piecewise between every support edge and peak so that the
  // integrand is smooth on each piece.
  std::vector<double> knots;
  for (std::size_t i = 0; i < spec.components(); ++i) {
    const double c = spec.center(i);
    const double h = 0.5 * spec.scales[i];
    knots.insert(knots.end(), {c - h, c, c + h});
  }
  std::sort(knots.begin(), knots.end());
  const double tol = 1e-9 / static_cast<double>(knots.size());
  double h = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    if (knots[k + 1] > knots[k]) h += entropy_integral(pdf, knots[k], knots[k + 1], tol);
  return spec.dim * h;
}

// ---------------------------------------------------------------------------
// Uniform pairs

void UniformPairSpec::validate() const {
  if (dim < 1) throw ParameterError("uniform pair dimension must be at least 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("uniform pair correlation must lie in [0, 1)");
}

PairBatch sample_uniform_pair(const UniformPairSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  std::uniform_real_distribution<double> u(-kSqrt3, kSqrt3);
  const double noise = std::sqrt(1.0 - spec.rho * spec.rho);
  PairBatch b{Matrix(static_cast<Eigen::Index>(n), spec.dim), Matrix(static_cast<Eigen::Index>(n), spec.dim)};
  for (Eigen::Index i = 0; i < b.x.size(); ++i) {
    const double x = u(rng);
    b.x.data()[i] = x;
    b.y.data()[i] = spec.rho * x + noise * u(rng);
  }
  return b;
}

Dataset sample_uniform_pair(const UniformPairSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return paired(sample_uniform_pair(spec, n, rng));
}

double uniform_sum_pdf(double rho, double y) {
  // Sum of U[-a, a] and U[-b, b] with a >= b: flat top of height 1/(2a) on
  // |y| <= a - b, linear ramps down to zero at a + b.
  const double p = rho * kSqrt3;
  const double q = std::sqrt(1.0 - rho * rho) * kSqrt3;
  const double a = std::max(p, q);
  const double b = std::min(p, q);
  const double t = std::abs(y);
  if (t >= a + b) return 0.0;
  if (t <= a - b) return 1.0 / (2.0 * a);
  return (a + b - t) / (4.0 * a * b);
}

double oracle_mi_uniform(double rho) {
  UniformPairSpec{rho, 1}.validate();
  if (rho == 0.0) return 0.0;
  const double p = rho * kSqrt3;
  const double q = std::sqrt(1.0 - rho * rho) * kSqrt3;
  const double a = std::max(p, q);
  const double b = std::min(p, q);
  const auto pdf = [rho](double y) { return uniform_sum_pdf(rho, y); };
  // Symmetric density: integrate the right half piecewise and double it.
  double hy = 2.0 * entropy_integral(pdf, 0.0, a - b, 1e-10);
  hy += 2.0 * entropy_integral(pdf, a - b, a + b, 1e-10);
  const double hy_given_x = std::log(2.0 * kSqrt3) + 0.5 * std::log1p(-rho * rho);
  return hy - hy_given_x;
}

// ---------------------------------------------------------------------------
// Target inversion

double rho_for_target_mi_gauss(double target, int dim) {
  if (dim < 1 || !(target >= 0.0)) throw ParameterError("target MI must be non-negative");
  return std::sqrt(-std::expm1(-2.0 * target / dim));
}

double rho_for_target_mi_uniform(double target, int dim) {
  if (dim < 1 || !(target >= 0.0)) throw ParameterError("target MI must be non-negative");
  if (target == 0.0) return 0.0;
  const double per_dim = target / dim;
  double lo = 0.0;
  double hi = 1.0 - 1e-12;
  if (oracle_mi_uniform(hi) < per_dim) throw ParameterError("target MI is not reachable with uniform pairs");
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (oracle_mi_uniform(mid) < per_dim ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace knife
