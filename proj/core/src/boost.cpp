#include "knife/boost.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "knife/errors.hpp"

namespace knife {

Matrix sample_knife(const KnifeParams& theta, std::size_t n, Rng& rng) {
  theta.validate();
  if (theta.size() == 0) throw ParameterError("cannot sample from empty parameters");
  const Vector u = theta.weights();
  std::discrete_distribution<int> pick(u.data(), u.data() + u.size());
  std::normal_distribution<double> normal;
  const int d = theta.dim();
  std::vector<Matrix> chol;
  if (theta.covariance() == Covariance::full)
    for (int m = 0; m < theta.modes(); ++m) chol.push_back(theta.cholesky(m));

  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector eps(d);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const int m = pick(rng);
    for (int k = 0; k < d; ++k) eps[k] = normal(rng);
    if (theta.covariance() == Covariance::diagonal) {
      for (int k = 0; k < d; ++k) out(i, k) = theta.shifts()(m, k) + eps[k] * std::exp(-theta.log_diag()(m, k));
    } else {
      // L^T z = eps, so z has covariance (L L^T)^{-1}.
      const Vector z = chol[m].transpose().triangularView<Eigen::Upper>().solve(eps);
      out.row(i) = theta.shifts().row(m) + z.transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(int dim, int hidden_width) : net_(dim, hidden_width, 1) {}

Vector Discriminator::logits(const Matrix& x) const {
  return net_.forward(x).col(0).cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp);
}

Vector Discriminator::prob(const Matrix& x) const {
  return (1.0 + (-logits(x).array()).exp()).inverse().matrix();
}

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-class half of the balanced loss. target 0: softplus(z); target 1: softplus(-z).
double class_loss(const Mlp& net, const Matrix& x, int target, Vector* grad) {
  Mlp::Cache cache;
  const Matrix out = net.forward(x, grad ? &cache : nullptr);
  const double w = 0.5 / static_cast<double>(x.rows());
  const double sign = target == 0 ? 1.0 : -1.0;
  Matrix d_out = Matrix::Zero(out.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double raw = out(i, 0);
    const double z = std::clamp(raw, -Discriminator::kLogitClamp, Discriminator::kLogitClamp);
    loss += w * softplus(sign * z);
    // The clamp is flat outside [-30, 30].
    if (std::abs(raw) < Discriminator::kLogitClamp) d_out(i, 0) = w * (sigmoid(z) - static_cast<double>(target));
  }
  if (grad) net.backward(x, cache, d_out, *grad);
  return loss;
}

}  // namespace

LossGrad Discriminator::loss_and_grad(const Matrix& real, const Matrix& model) const {
  if (real.rows() < 1 || model.rows() < 1) throw ShapeError("empty discriminator batch");
  if (real.cols() != dim() || model.cols() != dim()) throw ShapeError("discriminator input has wrong width");
  LossGrad lg{0.0, Vector::Zero(net_.values().size())};
  lg.loss = class_loss(net_, real, 0, &lg.grad) + class_loss(net_, model, 1, &lg.grad);
  return lg;
}

double discriminator_gradcheck(const Discriminator& disc, const Matrix& real, const Matrix& model, double step) {
  const LossGrad lg = disc.loss_and_grad(real, model);
  Discriminator probe = disc;
  auto loss = [&](std::span<const double> v) {
    probe.net().values() = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    return class_loss(probe.net(), real, 0, nullptr) + class_loss(probe.net(), model, 1, nullptr);
  };
  const Vector& w = disc.net().values();
  const Vector fd = finite_difference_gradient(loss, {w.data(), static_cast<std::size_t>(w.size())}, step);
  return max_relative_error({lg.grad.data(), static_cast<std::size_t>(lg.grad.size())},
                            {fd.data(), static_cast<std::size_t>(fd.size())});
}

void DiscriminatorConfig::validate() const {
  if (hidden_width < 1) throw ParameterError("discriminator hidden width must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("discriminator learning rate must be positive");
  if (batch_size < 1 || iterations < 1) throw ParameterError("discriminator batch size and iterations must be positive");
}

Discriminator train_discriminator(const Sampler& real, const Sampler& model, const DiscriminatorConfig& cfg) {
  cfg.validate();
  Rng init_rng = make_rng(cfg.seed, 3);
  Rng real_rng = make_rng(cfg.seed, 4);
  Rng model_rng = make_rng(cfg.seed, 5);
  const Matrix probe = real(0, 1, real_rng);
  Discriminator disc(static_cast<int>(probe.cols()), cfg.hidden_width);
  disc.init(init_rng);
  TrainConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(disc.net().size());
  Vector& w = disc.net().values();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Matrix r = real(0, cfg.batch_size, real_rng);
    const Matrix m = model(0, cfg.batch_size, model_rng);
    const LossGrad lg = disc.loss_and_grad(r, m);
    if (!std::isfinite(lg.loss)) throw NumericError("non-finite discriminator loss", it);
    adam_step({w.data(), static_cast<std::size_t>(w.size())},
              {lg.grad.data(), static_cast<std::size_t>(lg.grad.size())}, adam, adam_cfg);
  }
  return disc;
}

Discriminator train_discriminator(const KnifeParams& theta, const Dataset& data, const DiscriminatorConfig& cfg) {
  data.validate();
  theta.validate();
  if (theta.size() == 0) throw ParameterError("discriminator needs fitted KNIFE parameters");
  if (theta.dim() != data.dim()) throw ShapeError("parameters and data have different dimensions");
  const Sampler model = [&theta](std::size_t, std::size_t n, Rng& rng) { return sample_knife(theta, n, rng); };
  return train_discriminator(resampler(data), model, cfg);
}

DiscriminatorScore score_discriminator(const Discriminator& disc, const Matrix& real, const Matrix& model) {
  if (real.rows() < 1 || model.rows() < 1) throw ShapeError("empty evaluation set");
  const Vector pr = disc.prob(real);
  const Vector pm = disc.prob(model);
  const double wrong_real = static_cast<double>((pr.array() > 0.5).count()) / static_cast<double>(pr.size());
  const double wrong_model = static_cast<double>((pm.array() <= 0.5).count()) / static_cast<double>(pm.size());
  const double ce = class_loss(disc.net(), real, 0, nullptr) + class_loss(disc.net(), model, 1, nullptr);
  return {0.5 * (wrong_real + wrong_model), ce};
}

// ---------------------------------------------------------------------------
// Bounds and boosting

KlLowerBounds kl_lower_bounds(double pe, double ce, double log_cap) {
  if (!(pe >= 0.0 && pe <= 1.0)) throw ParameterError("misclassification rate must lie in [0, 1]");
  if (!(ce > 0.0)) throw ParameterError("cross-entropy must be positive");
  KlLowerBounds b;
  if (pe > 0.5) {
    pe = 1.0 - pe;
    b.folded = true;
  }
  b.quadratic = 2.0 * (1.0 - 2.0 * pe) * (1.0 - 2.0 * pe);
  if (pe < 1e-12) {
    b.log = log_cap;
    b.capped = true;
  } else {
    b.log = std::min(log_cap, -std::log(4.0 * pe));
  }
  const double x = 1.0 - ce / std::numbers::ln2;
  b.ce_quadratic = 2.0 * x * std::abs(x);
  b.ce_log = -std::numbers::ln2 + std::log(std::numbers::ln2) - std::log(ce);
  b.quadratic = std::max(0.0, b.quadratic);
  b.log = std::max(0.0, b.log);
  b.ce_quadratic = std::max(0.0, b.ce_quadratic);
  b.ce_log = std::max(0.0, b.ce_log);
  return b;
}

BoostReport boost_report(const KnifeParams& theta, const Matrix& eval, const Discriminator& disc, Rng& rng,
                         double lambda) {
  const Matrix model = sample_knife(theta, static_cast<std::size_t>(eval.rows()), rng);
  const DiscriminatorScore s = score_discriminator(disc, eval, model);
  BoostReport r;
  r.plain_entropy = entropy_plugin(Dataset{eval, {}, {}}, theta);
  r.pe_hat = s.pe;
  r.ce_hat = s.ce;
  r.bounds = kl_lower_bounds(s.pe, s.ce);
  r.boosted_entropy_1 = r.plain_entropy - r.bounds.ce_quadratic;
  r.boosted_entropy_2 = r.plain_entropy - r.bounds.ce_log;
  r.lambda = lambda;
  return r;
}

double boosted_entropy(const KnifeParams& theta, const Matrix& eval, const Discriminator& disc, BoostVariant variant,
                       Rng& rng) {
  const BoostReport r = boost_report(theta, eval, disc, rng);
  return variant == BoostVariant::quadratic ? r.boosted_entropy_1 : r.boosted_entropy_2;
}

JointFitReport relaxed_joint_fit(const Dataset& train, const SupportSet& init, const TrainConfig& cfg,
                                 int disc_hidden, double lambda) {
  cfg.validate();
  train.validate();
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
  if (train.dim() != init.dim()) throw ShapeError("dataset and support dimensions differ");

  EntropyTrainer knife(init, EstimatorMode::knife, cfg);
  Discriminator disc(train.dim(), disc_hidden);
  // Same batch stream as fit_entropy; the discriminator uses its own streams.
  Rng batch_rng = make_rng(cfg.seed, 1);
  Rng init_rng = make_rng(cfg.seed, 3);
  Rng model_rng = make_rng(cfg.seed, 5);
  disc.init(init_rng);
  AdamState adam(disc.net().size());
  Vector& w = disc.net().values();
  const Sampler real = resampler(train);

  JointFitReport report;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
      const Matrix batch = real(e, cfg.batch_size, batch_rng);
      double loss = knife.step(batch);
      if (lambda > 0.0) {
        const Matrix model = sample_knife(knife.params(), cfg.batch_size, model_rng);
        LossGrad lg = disc.loss_and_grad(batch, model);
        lg.grad *= lambda;
        adam_step({w.data(), static_cast<std::size_t>(w.size())},
                  {lg.grad.data(), static_cast<std::size_t>(lg.grad.size())}, adam, cfg);
        loss += lambda * lg.loss;
      }
      if (!std::isfinite(loss)) throw NumericError("non-finite composite loss", report.loss_trace.size());
      report.loss_trace.push_back(loss);
    }
  }
  report.theta = knife.params();
  report.disc = std::move(disc);
  return report;
}

}  // namespace knife
