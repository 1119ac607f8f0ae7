#include "harness/gradcheck_suite.hpp"

#include "knife/boost.hpp"
#include "knife/conditional.hpp"

namespace knife::harness {

namespace {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd, Rng& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

KnifeParams random_params(int modes, int dim, Covariance cov, Rng& rng) {
  KnifeParams p(modes, dim, cov);
  p.logits() = normal_matrix(modes, 1, 0.5, rng);
  p.shifts() = normal_matrix(modes, dim, 1.0, rng);
  p.log_diag() = normal_matrix(modes, dim, 0.3, rng);
  if (cov == Covariance::full) p.off_diag() = normal_matrix(modes, p.off_diag().cols(), 0.3, rng);
  return p;
}

// One row per batch entry, each near a shift of `centers(i)`, so every
// component is responsible for at least one point; otherwise its gradient
// entries sit at the finite-difference roundoff floor.
template <class Centers>
Matrix near_shifts(int n, int modes, int dim, Centers centers, Rng& rng) {
  const Matrix noise = normal_matrix(n, dim, 0.5, rng);
  Matrix x(n, dim);
  for (int i = 0; i < n; ++i) x.row(i) = centers(i).row(i % modes) + noise.row(i);
  return x;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(std::size_t count, std::uint64_t base_seed, double step) {
  static const char* kinds[] = {"density-diagonal", "density-full", "conditioner", "discriminator"};
  std::vector<GradcheckResult> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = base_seed + i;
    Rng rng = make_rng(seed, 11);
    std::uniform_int_distribution<int> pick_m(1, 8), pick_d(1, 4), pick_n(2, 8);
    const int m = pick_m(rng);
    const int d = pick_d(rng);
    const int n = std::max(pick_n(rng), m);
    GradcheckResult r{kinds[i % 4], seed, 0.0};
    switch (i % 4) {
      case 0:
      case 1: {
        const Covariance cov = i % 4 == 0 ? Covariance::diagonal : Covariance::full;
        const KnifeParams p = random_params(m, d, cov, rng);
        const Matrix x = near_shifts(n, m, d, [&](int) -> Matrix { return p.shifts(); }, rng);
        r.max_relative_error = gradcheck(p, x, step);
        break;
      }
      case 2: {
        std::uniform_int_distribution<int> pick_y(1, 3), pick_h(2, 6);
        const int dy = pick_y(rng);
        const Covariance cov = rng() % 2 ? Covariance::full : Covariance::diagonal;
        const int modes = std::min(m, 4);
        ConditionerNet net(dy, pick_h(rng), modes, d, cov);
        net.init(rng, random_params(modes, d, cov, rng));
        const Matrix y = normal_matrix(n, dy, 1.0, rng);
        const Matrix x = near_shifts(
            n, modes, d, [&](int i) -> Matrix { return net.params_for({y.row(i).data(), static_cast<std::size_t>(dy)}).shifts(); },
            rng);
        r.max_relative_error = conditioner_gradcheck(net, x, y, step);
        break;
      }
      default: {
        std::uniform_int_distribution<int> pick_h(2, 8);
        Discriminator disc(d, pick_h(rng));
        disc.init(rng);
        const Matrix real = normal_matrix(n, d, 1.0, rng);
        const Matrix model = (normal_matrix(n, d, 1.0, rng).array() + 0.5).matrix();
        r.max_relative_error = discriminator_gradcheck(disc, real, model, step);
        break;
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace knife::harness
