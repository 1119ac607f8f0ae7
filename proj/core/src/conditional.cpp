#include "knife/conditional.hpp"

#include <cmath>

#include "knife/log.hpp"

namespace knife {

// ---------------------------------------------------------------------------
// ConditionerNet

ConditionerNet::ConditionerNet(int input_dim, int hidden_width, int modes, int dim, Covariance cov)
    : input_dim_(input_dim), hidden_(hidden_width), modes_(modes), dim_(dim), cov_(cov) {
  if (input_dim < 1 || hidden_width < 1 || modes < 1 || dim < 1)
    throw ParameterError("ConditionerNet sizes must be positive");
  const KnifeView layout{modes, dim, cov, nullptr};
  const int chol_out = static_cast<int>(layout.size() - layout.log_diag_offset());
  heads_[weights_head] = Mlp(input_dim, hidden_width, modes);
  heads_[shifts_head] = Mlp(input_dim, hidden_width, modes * dim);
  heads_[cholesky_head] = Mlp(input_dim, hidden_width, chol_out);
}

void ConditionerNet::init(Rng& rng, const KnifeParams& start) {
  if (start.modes() != modes_ || start.dim() != dim_ || start.covariance() != cov_)
    throw ShapeError("starting parameters do not match the conditioner layout");
  Eigen::Index offset = 0;
  for (auto& h : heads_) {
    h.init_uniform(rng);
    h.b2() = start.values().segment(offset, h.out_dim());
    offset += h.out_dim();
  }
}

std::size_t ConditionerNet::size() const {
  std::size_t n = 0;
  for (const auto& h : heads_) n += h.size();
  return n;
}

Vector ConditionerNet::flat() const {
  Vector out(static_cast<Eigen::Index>(size()));
  Eigen::Index offset = 0;
  for (const auto& h : heads_) {
    out.segment(offset, h.values().size()) = h.values();
    offset += h.values().size();
  }
  return out;
}

void ConditionerNet::set_flat(const Vector& values) {
  if (values.size() != static_cast<Eigen::Index>(size())) throw ShapeError("flat network vector has wrong size");
  Eigen::Index offset = 0;
  for (auto& h : heads_) {
    h.values() = values.segment(offset, h.values().size());
    offset += h.values().size();
  }
}

Matrix ConditionerNet::forward(const Matrix& y, Cache* cache) const {
  Matrix out(y.rows(), static_cast<Eigen::Index>(param_count()));
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const Matrix o = heads_[k].forward(y, cache ? &cache->heads[k] : nullptr);
    out.middleCols(col, o.cols()) = o;
    col += o.cols();
  }
  return out;
}

KnifeParams ConditionerNet::params_for(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != input_dim_) throw ShapeError("conditioning vector has wrong width");
  const Matrix in = Eigen::Map<const Matrix>(y.data(), 1, input_dim_);
  KnifeParams p(modes_, dim_, cov_);
  p.values() = forward(in).row(0).transpose();
  return p;
}

Vector ConditionerNet::backward(const Matrix& y, const Cache& cache, const Matrix& d_params) const {
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(size()));
  Eigen::Index col = 0;
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const Mlp& h = heads_[k];
    Vector g = Vector::Zero(h.values().size());
    h.backward(y, cache.heads[k], d_params.middleCols(col, h.out_dim()), g);
    grad.segment(offset, g.size()) = g;
    col += h.out_dim();
    offset += g.size();
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Continuous conditioning

namespace {

void check_pairs(const ConditionerNet& net, const Matrix& x, const Matrix& y) {
  if (x.rows() < 1) throw ShapeError("empty batch");
  if (x.rows() != y.rows()) throw ShapeError("x and y batches have different lengths");
  if (x.cols() != net.dim() || y.cols() != net.input_dim()) throw ShapeError("x or y has the wrong width");
}

}  // namespace

LossGrad conditional_loss_and_grad(const ConditionerNet& net, const Matrix& x, const Matrix& y) {
  check_pairs(net, x, y);
  ConditionerNet::Cache cache;
  const Matrix theta = net.forward(y, &cache);
  Matrix d_theta = Matrix::Zero(theta.rows(), theta.cols());
  const double scale = -1.0 / static_cast<double>(x.rows());
  double loss = 0.0;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    const KnifeView v{net.modes(), net.dim(), net.covariance(), theta.data() + n * theta.cols()};
    std::span<double> g(d_theta.data() + n * d_theta.cols(), static_cast<std::size_t>(d_theta.cols()));
    const double lp = KnifeEvaluator(v).log_density_with_grad(row(x, n), g, scale);
    if (!std::isfinite(lp)) throw NumericError("non-finite conditional log-density", static_cast<std::size_t>(n));
    loss += scale * lp;
  }
  return {loss, net.backward(y, cache, d_theta)};
}

double conditional_entropy(const ConditionerNet& net, const Matrix& x, const Matrix& y) {
  check_pairs(net, x, y);
  // Chunked so that large evaluation sets do not materialize N x P at once.
  constexpr Eigen::Index chunk = 4096;
  double acc = 0.0;
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    const Matrix theta = net.forward(y.middleRows(start, len));
    for (Eigen::Index n = 0; n < len; ++n) {
      const KnifeView v{net.modes(), net.dim(), net.covariance(), theta.data() + n * theta.cols()};
      const double lp = KnifeEvaluator(v).log_density(row(x, start + n));
      if (!std::isfinite(lp)) throw NumericError("non-finite conditional log-density", static_cast<std::size_t>(start + n));
      acc += lp;
    }
  }
  return -acc / static_cast<double>(x.rows());
}

double conditioner_gradcheck(const ConditionerNet& net, const Matrix& x, const Matrix& y, double step) {
  const LossGrad lg = conditional_loss_and_grad(net, x, y);
  ConditionerNet probe = net;
  const Vector w0 = net.flat();
  auto loss = [&](std::span<const double> v) {
    probe.set_flat(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    return conditional_loss_and_grad(probe, x, y).loss;
  };
  const Vector fd = finite_difference_gradient(loss, {w0.data(), static_cast<std::size_t>(w0.size())}, step);
  return max_relative_error({lg.grad.data(), static_cast<std::size_t>(lg.grad.size())},
                            {fd.data(), static_cast<std::size_t>(fd.size())});
}

double cond_log_density(std::span<const double> x, std::span<const double> y, const ConditionerNet& net) {
  return log_density_knife(x, net.params_for(y));
}

namespace {

class ConditionalTrainer {
 public:
  ConditionalTrainer(ConditionerNet net, const TrainConfig& cfg)
      : net_(std::move(net)), cfg_(cfg), weights_(net_.flat()), adam_(static_cast<std::size_t>(weights_.size())) {}

  double step(const Matrix& x, const Matrix& y) {
    const LossGrad lg = conditional_loss_and_grad(net_, x, y);
    adam_step({weights_.data(), static_cast<std::size_t>(weights_.size())},
              {lg.grad.data(), static_cast<std::size_t>(lg.grad.size())}, adam_, cfg_);
    net_.set_flat(weights_);
    return lg.loss;
  }

  const ConditionerNet& net() const { return net_; }

 private:
  ConditionerNet net_;
  TrainConfig cfg_;
  Vector weights_;
  AdamState adam_;
};

}  // namespace

ConditionalFitReport cond_entropy_continuous(const PairSampler& source, ConditionerNet net, const TrainConfig& cfg) {
  cfg.validate();
  ConditionalTrainer trainer(std::move(net), cfg);
  Rng batch_rng = make_rng(cfg.seed, 1);
  Rng eval_rng = make_rng(cfg.seed, 2);
  ConditionalFitReport report;
  report.seed = cfg.seed;
  PairBatch last;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
      last = source(e, cfg.batch_size, batch_rng);
      check_pairs(trainer.net(), last.x, last.y);
      report.loss_trace.push_back(trainer.step(last.x, last.y));
    }
    const PairBatch eval = source(e, cfg.effective_eval_size(), eval_rng);
    report.epoch_estimates.push_back(conditional_entropy(trainer.net(), eval.x, eval.y));
  }
  report.net = trainer.net();
  report.final_estimate = report.epoch_estimates.back();
  if (cfg.gradcheck) {
    const Eigen::Index n = std::min<Eigen::Index>(4, last.x.rows());
    report.gradcheck = conditioner_gradcheck(report.net, last.x.topRows(n), last.y.topRows(n), 1e-5);
  }
  return report;
}

ConditionalFitReport cond_entropy_continuous(const Dataset& train, const Dataset& eval, ConditionerNet net,
                                             const TrainConfig& cfg) {
  train.validate();
  eval.validate();
  if (!eval.cond) throw ShapeError("evaluation set needs a conditioning matrix");
  const PairSampler base = pair_resampler(train);
  TrainConfig c = cfg;
  c.eval_size = eval.size();
  std::size_t draws = 0;
  // Every (iterations_per_epoch + 1)-th draw is the end-of-epoch evaluation.
  const PairSampler source = [&](std::size_t e, std::size_t n, Rng& rng) -> PairBatch {
    if (++draws % (c.iterations_per_epoch + 1) == 0) return {eval.samples, *eval.cond};
    return base(e, n, rng);
  };
  return cond_entropy_continuous(source, std::move(net), c);
}

// ---------------------------------------------------------------------------
// Discrete conditioning

const KnifeParams& DiscreteConditionerTable::at(int label) const {
  const auto it = params.find(label);
  if (it == params.end()) throw MissingClassError("no parameters for label " + std::to_string(label));
  return it->second;
}

std::map<int, double> DiscreteConditionerTable::label_distribution() const {
  std::size_t total = 0;
  for (const auto& [label, n] : counts) total += n;
  std::map<int, double> p;
  for (const auto& [label, n] : counts) p[label] = static_cast<double>(n) / static_cast<double>(total);
  return p;
}

double cond_log_density(std::span<const double> x, int label, const DiscreteConditionerTable& table) {
  return log_density_knife(x, table.at(label));
}

namespace {

std::map<int, std::vector<std::size_t>> split_by_label(const Dataset& d) {
  if (!d.labels) throw ShapeError("dataset has no labels");
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < d.labels->size(); ++i) out[(*d.labels)[i]].push_back(i);
  return out;
}

}  // namespace

DiscreteConditionalReport cond_entropy_discrete(const Dataset& train, const Dataset& eval, const TrainConfig& cfg) {
  train.validate();
  eval.validate();
  const auto train_idx = split_by_label(train);
  const auto eval_idx = split_by_label(eval);
  for (const auto& [label, idx] : eval_idx)
    if (!train_idx.count(label)) throw MissingClassError("label " + std::to_string(label) + " has no training samples");

  DiscreteConditionalReport report;
  double weighted = 0.0;
  for (const auto& [label, idx] : train_idx) {
    const auto e = eval_idx.find(label);
    if (e == eval_idx.end() || e->second.empty())
      throw ShapeError("label " + std::to_string(label) + " has no evaluation samples");
    const std::size_t modes = std::min<std::size_t>(static_cast<std::size_t>(cfg.modes), idx.size());
    if (modes < static_cast<std::size_t>(cfg.modes))
      warn("label " + std::to_string(label) + " has fewer samples than kernels; shrinking M to " +
           std::to_string(modes));

    const Dataset subset = train.rows(idx);
    SupportSet support{subset.samples.topRows(static_cast<Eigen::Index>(modes))};
    Dataset fit_set = subset;
    if (subset.size() >= 2 * modes) {
      std::vector<std::size_t> rest(subset.size() - modes);
      for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = modes + i;
      fit_set = subset.rows(rest);
    }
    TrainConfig c = cfg;
    c.modes = static_cast<int>(modes);
    FitReport fit = fit_entropy(fit_set, eval.rows(e->second), support, EstimatorMode::knife, c);
    weighted += static_cast<double>(e->second.size()) * fit.final_estimate;
    report.table.params.emplace(label, fit.final_params);
    report.table.counts.emplace(label, e->second.size());
    report.fits.emplace(label, std::move(fit));
  }
  report.estimate = weighted / static_cast<double>(eval.size());
  return report;
}

DiscreteConditionalReport cond_entropy_discrete(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  const std::size_t half = data.size() / 2;
  std::vector<std::size_t> first(half), second(data.size() - half);
  for (std::size_t i = 0; i < half; ++i) first[i] = i;
  for (std::size_t i = half; i < data.size(); ++i) second[i - half] = i;
  return cond_entropy_discrete(data.rows(first), data.rows(second), cfg);
}

double marginal_from_conditional(const Dataset& z, const DiscreteConditionerTable& table,
                                 const std::map<int, double>& label_probs) {
  z.validate();
  for (const auto& [label, p] : label_probs)
    if (!table.params.count(label)) throw MissingClassError("label " + std::to_string(label) + " has no parameters");
  for (const auto& [label, theta] : table.params)
    if (!label_probs.count(label)) throw MissingClassError("label " + std::to_string(label) + " has no probability");

  std::vector<KnifeEvaluator> evals;
  std::vector<double> log_p;
  for (const auto& [label, p] : label_probs) {
    if (!(p >= 0.0)) throw ParameterError("label probabilities must be non-negative");
    evals.emplace_back(table.at(label).view());
    log_p.push_back(std::log(p));
  }
  std::vector<double> terms(evals.size());
  return entropy_plugin(z, [&](std::span<const double> x) {
    for (std::size_t s = 0; s < evals.size(); ++s) terms[s] = log_p[s] + evals[s].log_density(x);
    return log_sum_exp(terms);
  });
}

// ---------------------------------------------------------------------------
// Mutual information

MiReport mi_estimate(const PairSampler& source, const SupportSet& init_x, ConditionerNet net, const TrainConfig& cfg) {
  cfg.validate();
  TrainConfig marginal_cfg = cfg;
  marginal_cfg.learning_rate = cfg.learning_rate * cfg.theta_lr_multiplier;
  EntropyTrainer marginal(init_x, EstimatorMode::knife, marginal_cfg);
  ConditionalTrainer conditional(std::move(net), cfg);

  Rng batch_rng = make_rng(cfg.seed, 1);
  Rng eval_rng = make_rng(cfg.seed, 2);
  MiReport report;
  report.seed = cfg.seed;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
      const PairBatch b = source(e, cfg.batch_size, batch_rng);
      check_pairs(conditional.net(), b.x, b.y);
      const double l0 = marginal.step(b.x);
      const double l1 = conditional.step(b.x, b.y);
      report.loss_trace.push_back(l0 + l1);
    }
    const PairBatch eval = source(e, cfg.effective_eval_size(), eval_rng);
    const double hx = marginal.evaluate(eval.x);
    const double hxy = conditional_entropy(conditional.net(), eval.x, eval.y);
    report.epoch_marginal.push_back(hx);
    report.epoch_conditional.push_back(hxy);
    report.epoch_estimates.push_back(hx - hxy);
  }
  report.marginal = marginal.params();
  report.conditional = conditional.net();
  report.final_estimate = report.epoch_estimates.back();
  return report;
}

MiReport mi_estimate(const Dataset& train, const Dataset& eval, const SupportSet& init_x, ConditionerNet net,
                     const TrainConfig& cfg) {
  train.validate();
  eval.validate();
  if (!eval.cond) throw ShapeError("evaluation set needs a conditioning matrix");
  const PairSampler base = pair_resampler(train);
  TrainConfig c = cfg;
  c.eval_size = eval.size();
  std::size_t draws = 0;
  const PairSampler source = [&](std::size_t e, std::size_t n, Rng& rng) -> PairBatch {
    if (++draws % (c.iterations_per_epoch + 1) == 0) return {eval.samples, *eval.cond};
    return base(e, n, rng);
  };
  return mi_estimate(source, init_x, std::move(net), c);
}

}  // namespace knife
