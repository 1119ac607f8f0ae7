#include <benchmark/benchmark.h>

#include "knife/boost.hpp"
#include "knife/conditional.hpp"
#include "knife/training.hpp"

using namespace knife;

namespace {

Matrix gaussian_rows(Eigen::Index n, Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> nd;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

void BM_LogDensityRows(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto cov = state.range(2) ? Covariance::full : Covariance::diagonal;
  Rng rng = make_rng(0);
  const KnifeParams theta = initial_params(SupportSet{gaussian_rows(m, d, rng)}, EstimatorMode::knife, cov);
  const Matrix x = gaussian_rows(128, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(log_density_rows(theta.view(), x));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_LogDensityRows)->Args({128, 10, 0})->Args({128, 64, 0})->Args({128, 10, 1})->Args({16, 64, 1});

void BM_LossAndGrad(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  Rng rng = make_rng(1);
  const KnifeParams theta = initial_params(SupportSet{gaussian_rows(m, d, rng)}, EstimatorMode::knife);
  const Matrix batch = gaussian_rows(128, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(theta, batch));
  state.SetItemsProcessed(state.iterations() * batch.rows());
}
BENCHMARK(BM_LossAndGrad)->Args({128, 10})->Args({128, 64});

void BM_ConditionalLossAndGrad(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng = make_rng(2);
  ConditionerNet net(d, 128, 16, d);
  net.init(rng, initial_params(SupportSet{gaussian_rows(16, d, rng)}, EstimatorMode::knife));
  const Matrix x = gaussian_rows(128, d, rng);
  const Matrix y = gaussian_rows(128, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conditional_loss_and_grad(net, x, y));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_ConditionalLossAndGrad)->Arg(10)->Arg(20);

void BM_DiscriminatorStep(benchmark::State& state) {
  Rng rng = make_rng(3);
  Discriminator disc(1, 64);
  disc.init(rng);
  const Matrix real = gaussian_rows(128, 1, rng);
  const Matrix model = gaussian_rows(128, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(disc.loss_and_grad(real, model));
}
BENCHMARK(BM_DiscriminatorStep);

}  // namespace
BENCHMARK_MAIN();
