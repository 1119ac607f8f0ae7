#pragma once

#include <random>

#include "knife/density.hpp"

namespace knife::test {

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd, Rng& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Moderate-scale random parameters: every component matters near the origin.
inline KnifeParams random_params(int modes, int dim, Covariance cov, Rng& rng) {
  KnifeParams p(modes, dim, cov);
  p.logits() = normal_matrix(modes, 1, 0.5, rng);
  p.shifts() = normal_matrix(modes, dim, 1.0, rng);
  p.log_diag() = normal_matrix(modes, dim, 0.3, rng);
  if (cov == Covariance::full) p.off_diag() = normal_matrix(modes, p.off_diag().cols(), 0.3, rng);
  return p;
}

}  // namespace knife::test
