#pragma once

#include <array>

#include "knife/mlp.hpp"
#include "knife/training.hpp"

namespace knife {

/// Ancestral sampling: m ~ Categorical(u), then x = a_m + L_m^{-T} eps.
Matrix sample_knife(const KnifeParams& theta, std::size_t n, Rng& rng);

/// Binary classifier phi(x) = P(T = 1 | x) with a tanh hidden layer; real
/// data is class 0, model samples class 1.
class Discriminator {
 public:
  static constexpr double kLogitClamp = 30.0;

  Discriminator() = default;
  Discriminator(int dim, int hidden_width);

  void init(Rng& rng) { net_.init_uniform(rng); }
  int dim() const { return net_.in_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  // Clamped logits and probabilities, one per row.
  Vector logits(const Matrix& x) const;
  Vector prob(const Matrix& x) const;

  // Balanced cross-entropy 1/2 E_real[-log(1 - phi)] + 1/2 E_model[-log phi]
  // and its gradient with respect to net().values().
  LossGrad loss_and_grad(const Matrix& real, const Matrix& model) const;

 private:
  Mlp net_;
};

double discriminator_gradcheck(const Discriminator& disc, const Matrix& real, const Matrix& model, double step);

struct DiscriminatorConfig {
  int hidden_width = 64;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;   // per class
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Adam on the balanced cross-entropy; each step draws a batch from both samplers.
Discriminator train_discriminator(const Sampler& real, const Sampler& model, const DiscriminatorConfig& cfg);
/// Real batches resampled from `data`, model batches drawn fresh from theta.
Discriminator train_discriminator(const KnifeParams& theta, const Dataset& data, const DiscriminatorConfig& cfg);

struct DiscriminatorScore {
  double pe = 0.0;  // misclassification rate at the 0.5 threshold, both classes weighted equally
  double ce = 0.0;  // balanced cross-entropy in nats
};
DiscriminatorScore score_discriminator(const Discriminator& disc, const Matrix& real, const Matrix& model);

struct KlLowerBounds {
  double quadratic = 0.0;     // 2 (1 - 2 pe)^2
  double log = 0.0;           // -log(4 pe)
  double ce_quadratic = 0.0;  // 2 (1 - ce/log 2) |1 - ce/log 2|
  double ce_log = 0.0;        // -log 2 + log log 2 - log ce
  bool folded = false;        // pe > 1/2 was replaced by 1 - pe
  bool capped = false;        // pe < 1e-12, log bound set to the cap
};

/// All four bounds, floored at zero (KL is non-negative). Throws
/// ParameterError for ce <= 0 or pe outside [0, 1].
KlLowerBounds kl_lower_bounds(double pe, double ce, double log_cap = 30.0);

enum class BoostVariant { quadratic, log };

/// Plug-in cross-entropy on `eval` minus the cross-entropy-based KL lower
/// bound of the selected variant. Model samples for the discriminator
/// score are drawn from theta with `rng`.
double boosted_entropy(const KnifeParams& theta, const Matrix& eval, const Discriminator& disc, BoostVariant variant,
                       Rng& rng);

struct BoostReport {
  double plain_entropy = 0.0;
  double pe_hat = 0.0;
  double ce_hat = 0.0;
  KlLowerBounds bounds;
  double boosted_entropy_1 = 0.0;  // quadratic variant
  double boosted_entropy_2 = 0.0;  // log variant
  double lambda = 0.0;
};

/// Scores `disc` on `eval` against as many fresh model samples and fills every field.
BoostReport boost_report(const KnifeParams& theta, const Matrix& eval, const Discriminator& disc, Rng& rng,
                         double lambda = 0.0);

struct JointFitReport {
  KnifeParams theta;
  Discriminator disc;
  std::vector<double> loss_trace;  // plug-in loss + lambda * discriminator cross-entropy
};

/// Alternating minimization of the plug-in loss over theta and lambda times
/// the discriminator cross-entropy over the discriminator weights, one step
/// each per iteration on shared real batches. With lambda = 0 the
/// discriminator is never touched and theta matches fit_entropy() on the
/// same data and seed.
JointFitReport relaxed_joint_fit(const Dataset& train, const SupportSet& init, const TrainConfig& cfg,
                                 int disc_hidden, double lambda);

}  // namespace knife
