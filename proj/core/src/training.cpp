#include "knife/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "knife/log.hpp"

namespace knife {

std::string_view to_string(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::knife: return "knife";
    case EstimatorMode::schraudolph: return "schraudolph";
    case EstimatorMode::doe: return "doe";
    case EstimatorMode::parzen: return "parzen";
  }
  return "unknown";
}

EstimatorMode parse_estimator_mode(std::string_view name) {
  if (name == "knife") return EstimatorMode::knife;
  if (name == "schraudolph") return EstimatorMode::schraudolph;
  if (name == "doe") return EstimatorMode::doe;
  if (name == "parzen") return EstimatorMode::parzen;
  throw ParameterError("unknown estimator mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (batch_size == 0 || iterations_per_epoch == 0 || epochs == 0)
    throw ParameterError("batch_size, iterations_per_epoch and epochs must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw ParameterError("Adam betas must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw ParameterError("adam_eps must be positive");
  if (!(theta_lr_multiplier > 0.0)) throw ParameterError("theta_lr_multiplier must be positive");
  if (modes < 1) throw ParameterError("modes must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg, double lr_multiplier) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (grads.size() != params.size()) throw ShapeError("gradient and parameter sizes differ");
  if (state.step == 0 && state.first_moment.size() == 0) state = AdamState(params.size());
  if (state.first_moment.size() != n || state.second_moment.size() != n)
    throw ShapeError("Adam state does not match parameter size");

  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = cfg.learning_rate * lr_multiplier;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = grads[static_cast<std::size_t>(i)];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    params[static_cast<std::size_t>(i)] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
  }
}

LossGrad loss_and_grad(const KnifeParams& theta, const Matrix& batch, FreezeMask mask) {
  if (batch.rows() < 1) throw ShapeError("empty batch");
  if (batch.cols() != theta.dim()) throw ShapeError("batch dimension does not match parameters");
  LossGrad out{0.0, Vector::Zero(static_cast<Eigen::Index>(theta.size()))};
  const double scale = -1.0 / static_cast<double>(batch.rows());
  const Vector lp = log_density_rows(theta.view(), batch, {out.grad.data(), theta.size()}, scale);
  for (Eigen::Index n = 0; n < lp.size(); ++n) {
    if (!std::isfinite(lp[n])) throw NumericError("non-finite log-density in batch", static_cast<std::size_t>(n));
    out.loss += scale * lp[n];
  }
  const KnifeView v = theta.view();
  if (mask.weights) out.grad.head(theta.modes()).setZero();
  if (mask.shifts)
    out.grad.segment(static_cast<Eigen::Index>(v.shifts_offset()), Eigen::Index(theta.modes()) * theta.dim()).setZero();
  for (Eigen::Index i = 0; i < out.grad.size(); ++i)
    if (!std::isfinite(out.grad[i])) throw NumericError("non-finite gradient entry", static_cast<std::size_t>(i));
  return out;
}

Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, double step) {
  if (!(step > 0.0)) throw ParameterError("finite-difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  Vector g(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    g[static_cast<Eigen::Index>(i)] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("gradient sizes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double b = numeric[i];
    worst = std::max(worst, std::abs(a - b) / std::max(1e-12, std::abs(a) + std::abs(b)));
  }
  return worst;
}

double gradcheck(const KnifeParams& theta, const Matrix& batch, double step) {
  const LossGrad lg = loss_and_grad(theta, batch);
  KnifeParams probe = theta;
  auto loss = [&](std::span<const double> v) {
    probe.values() = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    return loss_and_grad(probe, batch).loss;
  };
  const Vector fd = finite_difference_gradient(loss, {theta.values().data(), theta.size()}, step);
  return max_relative_error({lg.grad.data(), theta.size()}, {fd.data(), theta.size()});
}

// ---------------------------------------------------------------------------

namespace {

Vector column_std(const Matrix& pts) {
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  const double denom = std::max<double>(1.0, static_cast<double>(pts.rows() - 1));
  Vector s = ((pts.rowwise() - mean).array().square().colwise().sum() / denom).sqrt().transpose();
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (!(s[k] > 1e-12)) s[k] = 1.0;  // degenerate support: fall back to unit scale
  return s;
}

void warn_if_overlapping(const Matrix& train, const Matrix& support) {
  std::set<std::vector<double>> pts;
  for (Eigen::Index m = 0; m < support.rows(); ++m) {
    const auto r = row(support, m);
    pts.emplace(r.begin(), r.end());
  }
  for (Eigen::Index n = 0; n < train.rows(); ++n) {
    const auto r = row(train, n);
    if (pts.count(std::vector<double>(r.begin(), r.end()))) {
      warn("training data overlaps the kernel support set; estimates may be biased");
      return;
    }
  }
}

}  // namespace

KnifeParams initial_params(const SupportSet& init, EstimatorMode mode, Covariance cov) {
  init.validate();
  const int d = init.dim();
  const Vector sd = column_std(init.points);
  if (mode == EstimatorMode::doe) {
    KnifeParams p(1, d, cov);
    p.shifts().row(0) = init.points.colwise().mean();
    for (int k = 0; k < d; ++k) p.log_diag()(0, k) = -std::log(sd[k]);
    return p;
  }
  const int M = static_cast<int>(init.size());
  KnifeParams p(M, d, mode == EstimatorMode::parzen ? Covariance::diagonal : cov);
  p.shifts() = init.points;
  const double shrink = std::pow(static_cast<double>(M), 1.0 / (d + 4.0));
  if (mode == EstimatorMode::parzen) {
    const double w = sd.mean() / shrink;
    p.log_diag().setConstant(-std::log(w));
    return p;
  }
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < d; ++k) p.log_diag()(m, k) = -std::log(sd[k] / shrink);
  return p;
}

EntropyTrainer::EntropyTrainer(const SupportSet& init, EstimatorMode mode, const TrainConfig& cfg)
    : mode_(mode), cfg_(cfg), params_(initial_params(init, mode, cfg.covariance)) {
  cfg_.validate();
  if (mode_ == EstimatorMode::parzen) {
    free_ = Vector::Constant(1, -params_.log_diag()(0, 0));  // log w
  } else {
    free_ = params_.values();
  }
  adam_ = AdamState(static_cast<std::size_t>(free_.size()));
}

void EntropyTrainer::sync_params() {
  if (mode_ == EstimatorMode::parzen) {
    params_.log_diag().setConstant(-free_[0]);
  } else {
    params_.values() = free_;
  }
}

void EntropyTrainer::set_free_parameters(const Vector& free) {
  if (free.size() != free_.size()) throw ShapeError("free parameter vector has wrong size");
  free_ = free;
  sync_params();
}

LossGrad EntropyTrainer::loss_and_grad(const Matrix& batch) const {
  FreezeMask mask{cfg_.freeze_shifts, cfg_.freeze_weights};
  if (mode_ != EstimatorMode::knife) mask = {true, true};
  if (mode_ == EstimatorMode::doe) mask.shifts = cfg_.freeze_shifts;
  LossGrad lg = knife::loss_and_grad(params_, batch, mask);
  if (mode_ == EstimatorMode::parzen) {
    // log_diag = -log w for every entry.
    const KnifeView v = params_.view();
    const double g = -lg.grad.segment(static_cast<Eigen::Index>(v.log_diag_offset()),
                                      Eigen::Index(v.modes) * v.dim).sum();
    lg.grad = Vector::Constant(1, g);
  }
  return lg;
}

double EntropyTrainer::step(const Matrix& batch) {
  const LossGrad lg = loss_and_grad(batch);
  adam_step({free_.data(), static_cast<std::size_t>(free_.size())},
            {lg.grad.data(), static_cast<std::size_t>(lg.grad.size())}, adam_, cfg_);
  sync_params();
  return lg.loss;
}

double EntropyTrainer::evaluate(const Matrix& eval) const {
  Dataset d{eval, std::nullopt, std::nullopt};
  return entropy_plugin(d, params_);
}

namespace {

using EpochDraw = std::function<Matrix(std::size_t epoch, Rng& rng)>;

FitReport run_fit(const EpochDraw& next_batch, const EpochDraw& eval_set, const SupportSet& init,
                  EstimatorMode mode, const TrainConfig& cfg) {
  cfg.validate();
  EntropyTrainer trainer(init, mode, cfg);
  Rng batch_rng = make_rng(cfg.seed, 1);
  Rng eval_rng = make_rng(cfg.seed, 2);
  FitReport report{{}, {}, 0.0, {}, std::nullopt, cfg.seed};
  report.loss_trace.reserve(cfg.epochs * cfg.iterations_per_epoch);
  Matrix last_batch;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
      last_batch = next_batch(e, batch_rng);
      const double loss = trainer.step(last_batch);
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss", report.loss_trace.size());
      report.loss_trace.push_back(loss);
    }
    report.epoch_estimates.push_back(trainer.evaluate(eval_set(e, eval_rng)));
  }
  report.final_params = trainer.params();
  report.final_estimate = report.epoch_estimates.back();
  if (cfg.gradcheck) {
    const Eigen::Index n = std::min<Eigen::Index>(8, last_batch.rows());
    report.gradcheck = gradcheck(trainer.params(), last_batch.topRows(n), 1e-5);
  }
  return report;
}

}  // namespace

FitReport fit_entropy(const Sampler& source, const SupportSet& init, EstimatorMode mode,
                      const TrainConfig& cfg) {
  return run_fit([&](std::size_t e, Rng& rng) { return source(e, cfg.batch_size, rng); },
                 [&](std::size_t e, Rng& rng) { return source(e, cfg.effective_eval_size(), rng); },
                 init, mode, cfg);
}

FitReport fit_entropy(const Dataset& train, const Dataset& eval, const SupportSet& init,
                      EstimatorMode mode, const TrainConfig& cfg) {
  train.validate();
  eval.validate();
  if (train.dim() != init.dim() || eval.dim() != init.dim())
    throw ShapeError("dataset and support dimensions differ");
  warn_if_overlapping(train.samples, init.points);
  const Sampler base = resampler(train);
  return run_fit([&](std::size_t e, Rng& rng) { return base(e, cfg.batch_size, rng); },
                 [&](std::size_t, Rng&) { return eval.samples; }, init, mode, cfg);
}

FitReport fit_entropy(const Dataset& data, const SupportSet& init, EstimatorMode mode, const TrainConfig& cfg) {
  data.validate();
  if (data.size() < 2) throw ShapeError("need at least two samples to hold out an evaluation set");
  const std::size_t half = data.size() / 2;
  std::vector<std::size_t> first(half), second(data.size() - half);
  for (std::size_t i = 0; i < half; ++i) first[i] = i;
  for (std::size_t i = half; i < data.size(); ++i) second[i - half] = i;
  return fit_entropy(data.rows(first), data.rows(second), init, mode, cfg);
}

}  // namespace knife
