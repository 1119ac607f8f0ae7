#pragma once

#include <vector>

#include "knife/types.hpp"

namespace knife {

// ---------------------------------------------------------------------------
// Gaussians

/// X_e ~ N(0, a^e I_d) for epoch e (a = 1 gives a fixed standard normal).
struct GaussianSpec {
  int dim = 1;
  double shrink = 1.0;
  void validate() const;
  double variance(std::size_t epoch) const;
};

double gaussian_entropy(int dim, double variance = 1.0);
// I(X;Y) for d independent coordinate pairs with correlation rho.
double gaussian_mi(int dim, double rho);

Matrix sample_gauss(const GaussianSpec& spec, std::size_t n, Rng& rng, std::size_t epoch = 0);
Dataset sample_gauss(const GaussianSpec& spec, std::size_t n, std::uint64_t seed, std::size_t epoch = 0);
Sampler gauss_sampler(const GaussianSpec& spec);

/// Per-coordinate pairs (X, rho X + sqrt(1 - rho^2) G), X and G standard normal.
PairBatch sample_correlated_gauss(int dim, double rho, std::size_t n, Rng& rng);
Dataset sample_correlated_gauss(int dim, double rho, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Triangle mixtures

/// Density of one coordinate: sum_i w_i T_{s_i}(x - i - 1/2), i = 0..c-1,
/// where T_s(x) = (1/s) max{0, 2 - 4|x|/s} has unit mass and base width s.
/// Coordinates are i.i.d.
struct TriangleMixtureSpec {
  std::vector<double> weights;
  std::vector<double> scales;
  int dim = 1;

  std::size_t components() const { return weights.size(); }
  double center(std::size_t i) const { return static_cast<double>(i) + 0.5; }
  void validate() const;
};

// Dirichlet(1) weights and scales uniform on [0.1, 1].
TriangleMixtureSpec random_triangle_spec(std::size_t components, int dim, Rng& rng);

double triangle_pdf(double x, double scale);
double triangle_mixture_pdf_1d(const TriangleMixtureSpec& spec, double x);
double triangle_entropy(double scale);

Matrix sample_triangle_mixture(const TriangleMixtureSpec& spec, std::size_t n, Rng& rng);
Dataset sample_triangle_mixture(const TriangleMixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// d times the quadrature entropy of one coordinate.
double oracle_entropy_triangle(const TriangleMixtureSpec& spec);

// ---------------------------------------------------------------------------
// Uniform pairs

/// X, E ~ U[-sqrt 3, sqrt 3] per coordinate and Y = rho X + sqrt(1 - rho^2) E.
struct UniformPairSpec {
  double rho = 0.0;
  int dim = 1;
  void validate() const;
};

PairBatch sample_uniform_pair(const UniformPairSpec& spec, std::size_t n, Rng& rng);
Dataset sample_uniform_pair(const UniformPairSpec& spec, std::size_t n, std::uint64_t seed);

// Density of Y for one coordinate (a trapezoid).
double uniform_sum_pdf(double rho, double y);
/// Per-coordinate I(X;Y) = h(Y) - h(Y|X), h(Y) by quadrature.
double oracle_mi_uniform(double rho);

// ---------------------------------------------------------------------------
// Target inversion

/// rho such that d coordinate pairs carry `target` nats.
double rho_for_target_mi_gauss(double target, int dim);
/// Same for uniform pairs, by bisection on the quadrature oracle to 1e-6 in rho.
double rho_for_target_mi_uniform(double target, int dim);

}  // namespace knife
