#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "knife/density.hpp"

namespace knife {

enum class EstimatorMode { knife, schraudolph, doe, parzen };

std::string_view to_string(EstimatorMode mode);
// Throws ParameterError for unknown names.
EstimatorMode parse_estimator_mode(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 128;
  std::size_t iterations_per_epoch = 200;
  std::size_t epochs = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool freeze_shifts = false;
  bool freeze_weights = false;
  // Scales the learning rate of the marginal parameters in MI training.
  double theta_lr_multiplier = 1.0;
  // Kernel size M.
  int modes = 128;
  Covariance covariance = Covariance::diagonal;
  // Size of the held-out evaluation set; 0 means "same size as the training
  // stream", i.e. iterations_per_epoch * batch_size.
  std::size_t eval_size = 0;
  // Run a finite-difference check of the final gradient.
  bool gradcheck = false;

  std::size_t effective_eval_size() const {
    return eval_size != 0 ? eval_size : iterations_per_epoch * batch_size;
  }
  void validate() const;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n)
      : first_moment(Vector::Zero(static_cast<Eigen::Index>(n))),
        second_moment(Vector::Zero(static_cast<Eigen::Index>(n))) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg, double lr_multiplier = 1.0);

struct FreezeMask {
  bool shifts = false;
  bool weights = false;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// Plug-in loss -(1/N) sum log p(x_n; theta) and its gradient with respect to
/// every unconstrained entry of theta. Frozen blocks get exactly zero.
LossGrad loss_and_grad(const KnifeParams& theta, const Matrix& batch, FreezeMask mask = {});

/// Central finite-difference gradient of f at x.
Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, double step);

/// max_i |a_i - b_i| / max(1e-12, |a_i| + |b_i|)
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Compares loss_and_grad() against central differences of the plug-in loss.
double gradcheck(const KnifeParams& theta, const Matrix& batch, double step);

struct FitReport {
  std::vector<double> loss_trace;       // one entry per iteration, batch loss before the update
  KnifeParams final_params;
  double final_estimate = 0.0;          // held-out plug-in estimate at the final iterate
  std::vector<double> epoch_estimates;  // held-out estimate at the end of each epoch
  std::optional<double> gradcheck;
  std::uint64_t seed = 0;
};

/// Initial parameters for a given estimator: shifts at the support, uniform
/// weights and per-dimension scale std(E) / M^(1/(d+4)). DoE takes the mean
/// and standard deviation of E; Parzen a single bandwidth (mean of the scales).
KnifeParams initial_params(const SupportSet& init, EstimatorMode mode, Covariance cov = Covariance::diagonal);

/// Minibatch Adam on the plug-in loss for one estimator family.
class EntropyTrainer {
 public:
  EntropyTrainer(const SupportSet& init, EstimatorMode mode, const TrainConfig& cfg);

  // One Adam step on `batch`; returns the batch loss before the update.
  double step(const Matrix& batch);
  LossGrad loss_and_grad(const Matrix& batch) const;
  double evaluate(const Matrix& eval) const;

  const KnifeParams& params() const { return params_; }
  EstimatorMode mode() const { return mode_; }
  // Free (optimized) parameter vector; equal to params().values() except in
  // Parzen mode, where it holds log w.
  const Vector& free_parameters() const { return free_; }
  void set_free_parameters(const Vector& free);

 private:
  void sync_params();

  EstimatorMode mode_;
  TrainConfig cfg_;
  KnifeParams params_;
  Vector free_;
  AdamState adam_;
};

/// Trains on fresh batches from `source` (epoch index passed through) and
/// reports the plug-in estimate on an independent evaluation set of
/// cfg.effective_eval_size() samples drawn from the same epoch distribution.
FitReport fit_entropy(const Sampler& source, const SupportSet& init, EstimatorMode mode,
                      const TrainConfig& cfg);

/// Fixed-dataset variant: batches are resampled with replacement from
/// `train`, estimates are computed on `eval`.
FitReport fit_entropy(const Dataset& train, const Dataset& eval, const SupportSet& init,
                      EstimatorMode mode, const TrainConfig& cfg);

/// Splits `data` in two halves: the first is trained on, the second held out.
FitReport fit_entropy(const Dataset& data, const SupportSet& init, EstimatorMode mode, const TrainConfig& cfg);

}  // namespace knife
