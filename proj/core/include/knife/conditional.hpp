#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "knife/mlp.hpp"
#include "knife/training.hpp"

namespace knife {

/// Theta(y) for continuous conditioning: three independent one-hidden-layer
/// tanh networks emitting, per input y, the weight logits, the shifts and the
/// unconstrained Cholesky entries of a KNIFE density over x. Concatenated,
/// the three outputs are exactly the flat KnifeParams layout.
class ConditionerNet {
 public:
  enum Head : std::size_t { weights_head = 0, shifts_head = 1, cholesky_head = 2 };

  ConditionerNet() = default;
  ConditionerNet(int input_dim, int hidden_width, int modes, int dim, Covariance cov = Covariance::diagonal);

  // Random hidden layers; output biases set so that Theta(y) starts near
  // `start` (e.g. initial_params() of a support sample).
  void init(Rng& rng, const KnifeParams& start);

  int input_dim() const { return input_dim_; }
  int hidden_width() const { return hidden_; }
  int modes() const { return modes_; }
  int dim() const { return dim_; }
  Covariance covariance() const { return cov_; }
  std::size_t param_count() const { return KnifeView::parameter_count(modes_, dim_, cov_); }

  std::array<Mlp, 3>& heads() { return heads_; }
  const std::array<Mlp, 3>& heads() const { return heads_; }

  // Total number of network weights and their concatenation in head order.
  std::size_t size() const;
  Vector flat() const;
  void set_flat(const Vector& values);

  struct Cache {
    std::array<Mlp::Cache, 3> heads;
  };
  // N x param_count(): row n holds the flat KNIFE parameters Theta(y_n).
  Matrix forward(const Matrix& y, Cache* cache = nullptr) const;
  KnifeParams params_for(std::span<const double> y) const;

  // d_params: N x param_count(). Returns d loss / d flat().
  Vector backward(const Matrix& y, const Cache& cache, const Matrix& d_params) const;

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  int modes_ = 0;
  int dim_ = 0;
  Covariance cov_ = Covariance::diagonal;
  std::array<Mlp, 3> heads_;
};

/// -(1/N) sum_n log p(x_n | y_n) and its gradient with respect to the flat network weights.
LossGrad conditional_loss_and_grad(const ConditionerNet& net, const Matrix& x, const Matrix& y);
double conditional_entropy(const ConditionerNet& net, const Matrix& x, const Matrix& y);
double conditioner_gradcheck(const ConditionerNet& net, const Matrix& x, const Matrix& y, double step);

/// One KNIFE parameter set per discrete label.
struct DiscreteConditionerTable {
  std::map<int, KnifeParams> params;
  std::map<int, std::size_t> counts;

  // Throws MissingClassError for labels without parameters.
  const KnifeParams& at(int label) const;
  // Empirical distribution N_y / N of the stored counts.
  std::map<int, double> label_distribution() const;
};

double cond_log_density(std::span<const double> x, std::span<const double> y, const ConditionerNet& net);
double cond_log_density(std::span<const double> x, int label, const DiscreteConditionerTable& table);

struct DiscreteConditionalReport {
  double estimate = 0.0;  // (1/N) sum_y N_y H_y over the evaluation set
  DiscreteConditionerTable table;
  std::map<int, FitReport> fits;
};

/// Fits one KNIFE per class (kernel size min(M, N_y), support = first rows of
/// the class's training subset) and returns the N_y-weighted average of the
/// per-class held-out plug-in entropies.
DiscreteConditionalReport cond_entropy_discrete(const Dataset& train, const Dataset& eval, const TrainConfig& cfg);
DiscreteConditionalReport cond_entropy_discrete(const Dataset& data, const TrainConfig& cfg);

struct ConditionalFitReport {
  std::vector<double> loss_trace;
  ConditionerNet net;
  double final_estimate = 0.0;
  std::vector<double> epoch_estimates;
  std::optional<double> gradcheck;
  std::uint64_t seed = 0;
};

/// Trains Theta(y) on -(1/N) sum log p(x_n | y_n) with Adam.
ConditionalFitReport cond_entropy_continuous(const PairSampler& source, ConditionerNet net, const TrainConfig& cfg);
ConditionalFitReport cond_entropy_continuous(const Dataset& train, const Dataset& eval, ConditionerNet net,
                                             const TrainConfig& cfg);

struct MiReport {
  std::vector<double> loss_trace;  // marginal + conditional batch loss
  KnifeParams marginal;
  ConditionerNet conditional;
  double final_estimate = 0.0;
  std::vector<double> epoch_estimates;  // per epoch: H(X) - H(X|Y) on fresh evaluation pairs
  std::vector<double> epoch_marginal;
  std::vector<double> epoch_conditional;
  std::uint64_t seed = 0;
};

/// Joint training of a marginal KNIFE (initialized from `init_x`, learning
/// rate scaled by cfg.theta_lr_multiplier) and a conditional network on the
/// same batches; reports I = H(X) - H(X|Y).
MiReport mi_estimate(const PairSampler& source, const SupportSet& init_x, ConditionerNet net, const TrainConfig& cfg);
MiReport mi_estimate(const Dataset& train, const Dataset& eval, const SupportSet& init_x, ConditionerNet net,
                     const TrainConfig& cfg);

/// -(1/N) sum_n log sum_s p(s) p(z_n | s): the mixture-marginal plug-in
/// entropy built from per-class estimates. Throws MissingClassError when the
/// table and the label distribution do not cover the same labels.
double marginal_from_conditional(const Dataset& z, const DiscreteConditionerTable& table,
                                 const std::map<int, double>& label_probs);

}  // namespace knife
