#pragma once

#include <span>
#include <vector>

#include "knife/errors.hpp"
#include "knife/types.hpp"

namespace knife {

enum class Covariance { diagonal, full };

/// Non-owning view of KNIFE parameters in their flat, unconstrained layout:
///
///   [ weight logits (M) | shifts (M x d) | log diag of L_m (M x d) | strict lower L_m ]
///
/// The last block is present only for full covariances and stores, for each
/// component, the entries L(i, j), i > j, in row-major order.
/// P_m = L_m L_m^T is the precision of component m.
struct KnifeView {
  int modes = 0;
  int dim = 0;
  Covariance cov = Covariance::diagonal;
  const double* values = nullptr;

  static std::size_t parameter_count(int modes, int dim, Covariance cov);
  static std::size_t off_diagonal_count(int dim) {
    return static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim - 1) / 2;
  }

  std::size_t size() const { return parameter_count(modes, dim, cov); }
  std::size_t shifts_offset() const { return static_cast<std::size_t>(modes); }
  std::size_t log_diag_offset() const { return shifts_offset() + std::size_t(modes) * dim; }
  std::size_t off_diag_offset() const { return log_diag_offset() + std::size_t(modes) * dim; }

  const double* logits() const { return values; }
  const double* shift(int m) const { return values + shifts_offset() + std::size_t(m) * dim; }
  const double* log_diag(int m) const { return values + log_diag_offset() + std::size_t(m) * dim; }
  const double* off_diag(int m) const {
    return values + off_diag_offset() + std::size_t(m) * off_diagonal_count(dim);
  }
};

/// Trainable KNIFE parameters theta = (A, a, u) held in unconstrained form.
/// Weights u = softmax(logits); the Cholesky factor of each precision matrix
/// has its diagonal stored as logs so it stays strictly positive.
class KnifeParams {
 public:
  KnifeParams() = default;
  // Uniform weights, zero shifts and identity covariances.
  KnifeParams(int modes, int dim, Covariance cov = Covariance::diagonal);

  int modes() const { return modes_; }
  int dim() const { return dim_; }
  Covariance covariance() const { return cov_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  KnifeView view() const { return {modes_, dim_, cov_, values_.data()}; }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Eigen::Map<Vector> logits();
  Eigen::Map<const Vector> logits() const;
  Eigen::Map<Matrix> shifts();
  Eigen::Map<const Matrix> shifts() const;
  Eigen::Map<Matrix> log_diag();
  Eigen::Map<const Matrix> log_diag() const;
  // Empty (M x 0) for diagonal covariances.
  Eigen::Map<Matrix> off_diag();
  Eigen::Map<const Matrix> off_diag() const;

  Vector weights() const;
  Matrix cholesky(int m) const;
  Matrix precision(int m) const;
  Matrix covariance_matrix(int m) const;
  double log_det_covariance(int m) const;

  // Sets component m to covariance A (symmetric positive definite). For a
  // diagonal parameterization only diag(A) is used.
  void set_covariance(int m, const Matrix& A);
  void set_isotropic_scale(int m, double sigma);

  // Throws ParameterError when a value is non-finite.
  void validate() const;

  bool operator==(const KnifeParams&) const = default;

 private:
  int modes_ = 0;
  int dim_ = 0;
  Covariance cov_ = Covariance::diagonal;
  Vector values_;
};

/// Single Gaussian density used by the DoE baseline.
struct DoeParams {
  Vector mean;
  Matrix chol_precision;  // lower triangular with positive diagonal
  bool diagonal = true;

  static DoeParams standard(int dim);
  int dim() const { return static_cast<int>(mean.size()); }
  KnifeParams to_knife() const;
  static DoeParams from_knife(const KnifeParams& single);
};

enum class KernelId { gaussian, epanechnikov, uniform, truncated_gaussian };

double log_sum_exp(std::span<const double> terms);

/// Caches per-component constants (log weights, precision factors, log
/// determinants) so that many points can be scored against the same
/// parameters. Holds a copy of the view, not of the values: the parameters
/// must outlive the evaluator and stay unchanged.
class KnifeEvaluator {
 public:
  explicit KnifeEvaluator(const KnifeView& theta);

  double log_density(std::span<const double> x) const;
  // Accumulates `scale * d log p(x) / d values` into `grad`.
  double log_density_with_grad(std::span<const double> x, std::span<double> grad,
                               double scale) const;

  const KnifeView& view() const { return theta_; }

 private:
  // Fills terms_[m] = log u_m + log N(x; a_m, A_m); for full covariances also z_.
  void component_terms(std::span<const double> x) const;

  KnifeView theta_;
  Vector log_weights_;
  Vector weights_;
  Matrix diag_;        // M x d, exp of the stored log diagonal
  Vector log_norm_;    // sum_k log L_kk - d/2 log 2 pi
  std::vector<Matrix> chol_;  // full covariances only
  mutable Vector terms_;
  mutable Matrix z_;   // M x d, z_m = L_m^T (x - a_m)
};

/// log sum_m u_m N(x; a_m, A_m), evaluated with log-sum-exp over components.
double log_density_knife(std::span<const double> x, const KnifeParams& theta);
double log_density(std::span<const double> x, const KnifeView& theta);

/// Same as log_density(), additionally accumulating `scale * d log p / d values`
/// into `grad` (which must have KnifeView::size() entries).
double log_density_with_grad(std::span<const double> x, const KnifeView& theta,
                             std::span<double> grad, double scale);

/// log p for every row of `x`; if `grad` is non-empty, also accumulates
/// scale * sum_n d log p(x_n) / d values. Diagonal covariances use a
/// matrix-product expansion of the quadratic form; full covariances, and
/// inputs whose magnitude relative to the kernel width would make that
/// expansion inaccurate, go through KnifeEvaluator point by point.
Vector log_density_rows(const KnifeView& theta, const Matrix& x, std::span<double> grad = {}, double scale = 0.0);

/// -(1/N) sum_n logp(x_n). Throws NumericError naming the first sample whose
/// log-density is not finite.
double entropy_plugin(const Dataset& data,
                      const std::function<double(std::span<const double>)>& logp);
double entropy_plugin(const Dataset& data, const KnifeParams& theta);

/// Heteroscedastic kernel estimate (1/M) sum_m N(x; x'_m, A_m) with one
/// covariance matrix per support point. Evaluated through a covariance
/// Cholesky factorization, independently of the KNIFE code path.
double log_density_schraudolph(std::span<const double> x, const std::vector<Matrix>& covariances,
                               const SupportSet& support);

// KNIFE parameters equivalent to the Schraudolph estimate (uniform weights,
// shifts pinned at the support).
KnifeParams schraudolph_params(const std::vector<Matrix>& covariances, const SupportSet& support,
                               Covariance cov = Covariance::full);

/// Parzen-Rosenblatt estimate (1/(w^d M)) sum_m kappa((x - x'_m) / w). Only
/// the Gaussian kernel is implemented.
double log_density_parzen(std::span<const double> x, double bandwidth, const SupportSet& support,
                          KernelId kernel = KernelId::gaussian);

double log_density_doe(std::span<const double> x, const DoeParams& p);

}  // namespace knife
