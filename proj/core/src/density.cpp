#include "knife/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace knife {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

void require_finite(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) throw InputDomainError("non-finite input coordinate " + std::to_string(i));
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter layout

std::size_t KnifeView::parameter_count(int modes, int dim, Covariance cov) {
  const auto m = static_cast<std::size_t>(modes);
  const auto d = static_cast<std::size_t>(dim);
  std::size_t n = m + 2 * m * d;
  if (cov == Covariance::full) n += m * off_diagonal_count(dim);
  return n;
}

KnifeParams::KnifeParams(int modes, int dim, Covariance cov) : modes_(modes), dim_(dim), cov_(cov) {
  if (modes < 1 || dim < 1) throw ParameterError("KnifeParams needs modes >= 1 and dim >= 1");
  values_ = Vector::Zero(static_cast<Eigen::Index>(KnifeView::parameter_count(modes, dim, cov)));
}

Eigen::Map<Vector> KnifeParams::logits() { return {values_.data(), modes_}; }
Eigen::Map<const Vector> KnifeParams::logits() const { return {values_.data(), modes_}; }

Eigen::Map<Matrix> KnifeParams::shifts() {
  return {values_.data() + view().shifts_offset(), modes_, dim_};
}
Eigen::Map<const Matrix> KnifeParams::shifts() const {
  return {values_.data() + view().shifts_offset(), modes_, dim_};
}
Eigen::Map<Matrix> KnifeParams::log_diag() {
  return {values_.data() + view().log_diag_offset(), modes_, dim_};
}
Eigen::Map<const Matrix> KnifeParams::log_diag() const {
  return {values_.data() + view().log_diag_offset(), modes_, dim_};
}

Eigen::Map<Matrix> KnifeParams::off_diag() {
  const auto cols = cov_ == Covariance::full ? KnifeView::off_diagonal_count(dim_) : 0;
  return {values_.data() + view().off_diag_offset(), modes_, static_cast<Eigen::Index>(cols)};
}
Eigen::Map<const Matrix> KnifeParams::off_diag() const {
  const auto cols = cov_ == Covariance::full ? KnifeView::off_diagonal_count(dim_) : 0;
  return {values_.data() + view().off_diag_offset(), modes_, static_cast<Eigen::Index>(cols)};
}

Vector KnifeParams::weights() const {
  const Vector l = logits();
  const double mx = l.maxCoeff();
  Vector u = (l.array() - mx).exp();
  return u / u.sum();
}

Matrix KnifeParams::cholesky(int m) const {
  Matrix L = Matrix::Zero(dim_, dim_);
  const auto ld = log_diag();
  for (int i = 0; i < dim_; ++i) L(i, i) = std::exp(ld(m, i));
  if (cov_ == Covariance::full) {
    const double* off = view().off_diag(m);
    for (int i = 1; i < dim_; ++i)
      for (int j = 0; j < i; ++j) L(i, j) = *off++;
  }
  return L;
}

Matrix KnifeParams::precision(int m) const {
  const Matrix L = cholesky(m);
  return L * L.transpose();
}

Matrix KnifeParams::covariance_matrix(int m) const {
  const Matrix L = cholesky(m);
  const Matrix Linv = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim_, dim_));
  return Linv.transpose() * Linv;
}

double KnifeParams::log_det_covariance(int m) const { return -2.0 * log_diag().row(m).sum(); }

void KnifeParams::set_covariance(int m, const Matrix& A) {
  if (A.rows() != dim_ || A.cols() != dim_) throw ShapeError("covariance has wrong shape");
  if (cov_ == Covariance::diagonal) {
    for (int i = 0; i < dim_; ++i) {
      if (!(A(i, i) > 0.0)) throw ParameterError("covariance diagonal must be positive");
      log_diag()(m, i) = -0.5 * std::log(A(i, i));
    }
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(A.inverse());
  if (llt.info() != Eigen::Success) throw ParameterError("covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  double* off = values_.data() + view().off_diag_offset() + std::size_t(m) * KnifeView::off_diagonal_count(dim_);
  for (int i = 0; i < dim_; ++i) {
    log_diag()(m, i) = std::log(L(i, i));
    for (int j = 0; j < i; ++j) *off++ = L(i, j);
  }
}

void KnifeParams::set_isotropic_scale(int m, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("scale must be positive");
  log_diag().row(m).setConstant(-std::log(sigma));
  if (cov_ == Covariance::full) off_diag().row(m).setZero();
}

void KnifeParams::validate() const {
  if (modes_ < 1 || dim_ < 1) throw ParameterError("KnifeParams is empty");
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i])) throw NumericError("non-finite KNIFE parameter", static_cast<std::size_t>(i));
}

DoeParams DoeParams::standard(int dim) {
  return {Vector::Zero(dim), Matrix::Identity(dim, dim), true};
}

KnifeParams DoeParams::to_knife() const {
  KnifeParams k(1, dim(), diagonal ? Covariance::diagonal : Covariance::full);
  k.shifts().row(0) = mean.transpose();
  for (int i = 0; i < dim(); ++i) k.log_diag()(0, i) = std::log(chol_precision(i, i));
  if (!diagonal) {
    auto off = k.off_diag();
    Eigen::Index c = 0;
    for (int i = 1; i < dim(); ++i)
      for (int j = 0; j < i; ++j) off(0, c++) = chol_precision(i, j);
  }
  return k;
}

DoeParams DoeParams::from_knife(const KnifeParams& single) {
  if (single.modes() != 1) throw ShapeError("DoE parameters need exactly one component");
  return {single.shifts().row(0).transpose(), single.cholesky(0),
          single.covariance() == Covariance::diagonal};
}

// ---------------------------------------------------------------------------
// Evaluation

double log_sum_exp(std::span<const double> terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

KnifeEvaluator::KnifeEvaluator(const KnifeView& theta) : theta_(theta) {
  const int M = theta.modes;
  const int d = theta.dim;
  if (M < 1 || d < 1 || theta.values == nullptr) throw ParameterError("empty KNIFE parameters");

  const Eigen::Map<const Vector> logits(theta.logits(), M);
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  log_weights_ = logits.array() - lse;
  weights_ = log_weights_.array().exp();

  const Eigen::Map<const Matrix> ld(theta.log_diag(0), M, d);
  diag_ = ld.array().exp();
  log_norm_ = ld.rowwise().sum().array() - 0.5 * d * kLog2Pi;

  if (theta.cov == Covariance::full) {
    chol_.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
      Matrix L = Matrix::Zero(d, d);
      const double* off = theta.off_diag(m);
      for (int i = 0; i < d; ++i) {
        L(i, i) = diag_(m, i);
        for (int j = 0; j < i; ++j) L(i, j) = *off++;
      }
      chol_.push_back(std::move(L));
    }
  }
  if (!log_weights_.allFinite() || !diag_.allFinite() || !log_norm_.allFinite())
    throw NumericError("non-finite KNIFE parameters", 0);
  terms_.resize(M);
  z_.resize(M, d);
}

void KnifeEvaluator::component_terms(std::span<const double> x) const {
  const int M = theta_.modes;
  const int d = theta_.dim;
  if (static_cast<int>(x.size()) != d) throw ShapeError("point dimension does not match parameters");
  for (int m = 0; m < M; ++m) {
    const double* a = theta_.shift(m);
    double* z = z_.data() + std::size_t(m) * d;
    double q = 0.0;
    if (theta_.cov == Covariance::diagonal) {
      const double* l = diag_.data() + std::size_t(m) * d;
      for (int k = 0; k < d; ++k) {
        z[k] = l[k] * (x[k] - a[k]);
        q += z[k] * z[k];
      }
    } else {
      const Matrix& L = chol_[std::size_t(m)];
      // z = L^T (x - a): z_j = sum_{i >= j} L(i, j) (x_i - a_i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = j; i < d; ++i) s += L(i, j) * (x[i] - a[i]);
        z[j] = s;
        q += s * s;
      }
    }
    terms_[m] = log_weights_[m] + log_norm_[m] - 0.5 * q;
  }
}

double KnifeEvaluator::log_density(std::span<const double> x) const {
  require_finite(x);
  component_terms(x);
  return log_sum_exp({terms_.data(), static_cast<std::size_t>(terms_.size())});
}

double KnifeEvaluator::log_density_with_grad(std::span<const double> x, std::span<double> grad,
                                             double scale) const {
  if (grad.size() != theta_.size()) throw ShapeError("gradient buffer has wrong size");
  require_finite(x);
  component_terms(x);
  const int M = theta_.modes;
  const int d = theta_.dim;
  const double lp = log_sum_exp({terms_.data(), static_cast<std::size_t>(terms_.size())});
  if (!std::isfinite(lp)) throw NumericError("log-density underflowed for every component", 0);

  double* g_logit = grad.data();
  double* g_shift = grad.data() + theta_.shifts_offset();
  double* g_ld = grad.data() + theta_.log_diag_offset();
  double* g_off = grad.data() + theta_.off_diag_offset();
  const std::size_t n_off = KnifeView::off_diagonal_count(d);

  for (int m = 0; m < M; ++m) {
    // d lp / d term_m is the responsibility r_m.
    const double r = std::exp(terms_[m] - lp);
    const double sr = scale * r;
    g_logit[m] += scale * (r - weights_[m]);
    const double* z = z_.data() + std::size_t(m) * d;
    double* ga = g_shift + std::size_t(m) * d;
    double* gl = g_ld + std::size_t(m) * d;
    if (theta_.cov == Covariance::diagonal) {
      const double* l = diag_.data() + std::size_t(m) * d;
      for (int k = 0; k < d; ++k) {
        ga[k] += sr * l[k] * z[k];
        gl[k] += sr * (1.0 - z[k] * z[k]);
      }
    } else {
      const Matrix& L = chol_[std::size_t(m)];
      const double* a = theta_.shift(m);
      double* go = g_off + std::size_t(m) * n_off;
      for (int i = 0; i < d; ++i) {
        const double delta = x[i] - a[i];
        double lz = 0.0;  // (L z)_i
        for (int j = 0; j <= i; ++j) lz += L(i, j) * z[j];
        ga[i] += sr * lz;
        gl[i] += sr * (1.0 - L(i, i) * z[i] * delta);
        for (int j = 0; j < i; ++j) *go++ += -sr * z[j] * delta;
      }
    }
  }
  return lp;
}

double log_density(std::span<const double> x, const KnifeView& theta) {
  return KnifeEvaluator(theta).log_density(x);
}

double log_density_knife(std::span<const double> x, const KnifeParams& theta) {
  return log_density(x, theta.view());
}

double log_density_with_grad(std::span<const double> x, const KnifeView& theta, std::span<double> grad,
                             double scale) {
  return KnifeEvaluator(theta).log_density_with_grad(x, grad, scale);
}

double entropy_plugin(const Dataset& data, const std::function<double(std::span<const double>)>& logp) {
  if (data.size() == 0) throw ShapeError("entropy_plugin needs at least one sample");
  double acc = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double v = logp(row(data.samples, static_cast<Eigen::Index>(n)));
    if (!std::isfinite(v)) throw NumericError("non-finite log-density", n);
    acc += v;
  }
  return -acc / static_cast<double>(data.size());
}

namespace {

// Whether x^2 - 2ax + a^2 stays accurate to ~1e-9 in units of the kernel width.
bool expansion_is_safe(const Matrix& x, const Eigen::Map<const Matrix>& shifts, const Matrix& precision) {
  const Eigen::RowVectorXd reach = x.cwiseAbs().colwise().maxCoeff() + shifts.cwiseAbs().colwise().maxCoeff();
  const Eigen::RowVectorXd p_max = precision.colwise().maxCoeff();
  return (reach.array().square() * p_max.array()).maxCoeff() * std::numeric_limits<double>::epsilon() < 1e-9;
}

Vector rows_pointwise(const KnifeView& theta, const Matrix& x, std::span<double> grad, double scale) {
  const KnifeEvaluator eval(theta);
  Vector out(x.rows());
  for (Eigen::Index n = 0; n < x.rows(); ++n)
    out[n] = grad.empty() ? eval.log_density(row(x, n)) : eval.log_density_with_grad(row(x, n), grad, scale);
  return out;
}

}  // namespace

Vector log_density_rows(const KnifeView& theta, const Matrix& x, std::span<double> grad, double scale) {
  const int M = theta.modes;
  const int d = theta.dim;
  if (x.cols() != d) throw ShapeError("point dimension does not match parameters");
  if (!grad.empty() && grad.size() != theta.size()) throw ShapeError("gradient buffer has wrong size");
  if (!x.allFinite()) throw InputDomainError("non-finite input");
  if (theta.cov == Covariance::full || x.rows() == 0) return rows_pointwise(theta, x, grad, scale);

  const Eigen::Map<const Vector> logits(theta.logits(), M);
  const Eigen::Map<const Matrix> shifts(theta.shift(0), M, d);
  const Eigen::Map<const Matrix> ld(theta.log_diag(0), M, d);
  const Matrix prec = (2.0 * ld.array()).exp().matrix();
  // Center on the mean shift to keep the expanded terms small.
  const Eigen::RowVectorXd center = shifts.colwise().mean();
  const Matrix a = shifts.rowwise() - center;
  const Matrix xc = x.rowwise() - center;
  if (!expansion_is_safe(xc, Eigen::Map<const Matrix>(a.data(), M, d), prec))
    return rows_pointwise(theta, x, grad, scale);

  const double mx = logits.maxCoeff();
  const Vector log_u = logits.array() - (mx + std::log((logits.array() - mx).exp().sum()));
  const Eigen::RowVectorXd base =
      (log_u.array() + ld.rowwise().sum().array() - 0.5 * d * kLog2Pi).matrix().transpose() -
      0.5 * (prec.array() * a.array().square()).rowwise().sum().matrix().transpose();
  const Matrix pa = (prec.array() * a.array()).matrix();
  const Matrix x2 = xc.array().square().matrix();

  // terms(n, m) = log u_m + log|L_m| - d/2 log 2pi - 1/2 |L_m (x_n - a_m)|^2
  Matrix terms = xc * pa.transpose();
  terms.noalias() -= 0.5 * x2 * prec.transpose();
  terms.rowwise() += base;

  const Vector row_max = terms.rowwise().maxCoeff();
  Matrix resp = (terms.colwise() - row_max).array().exp().matrix();
  const Vector sums = resp.rowwise().sum();
  Vector out = row_max.array() + sums.array().log();
  if (grad.empty()) return out;
  for (Eigen::Index n = 0; n < out.size(); ++n)
    if (!std::isfinite(out[n])) return out;
  resp.array().colwise() /= sums.array();

  const Vector r_sum = resp.colwise().sum().transpose();
  const Matrix rx = resp.transpose() * xc;
  const Matrix rx2 = resp.transpose() * x2;
  Eigen::Map<Vector> g_logits(grad.data(), M);
  Eigen::Map<Matrix> g_shift(grad.data() + theta.shifts_offset(), M, d);
  Eigen::Map<Matrix> g_ld(grad.data() + theta.log_diag_offset(), M, d);
  const double rows = static_cast<double>(x.rows());
  g_logits += scale * (r_sum - rows * log_u.array().exp().matrix());
  const Matrix r_diff = rx - (a.array().colwise() * r_sum.array()).matrix();  // sum_n r (x - a)
  g_shift += scale * (prec.array() * r_diff.array()).matrix();
  const Matrix r_sq = rx2 - 2.0 * (a.array() * rx.array()).matrix() +
                      (a.array().square().colwise() * r_sum.array()).matrix();  // sum_n r (x - a)^2
  g_ld += scale * ((-(prec.array() * r_sq.array())).colwise() + r_sum.array()).matrix();
  return out;
}

double entropy_plugin(const Dataset& data, const KnifeParams& theta) {
  if (data.size() == 0) throw ShapeError("entropy_plugin needs at least one sample");
  constexpr Eigen::Index chunk = 4096;
  double acc = 0.0;
  for (Eigen::Index start = 0; start < data.samples.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, data.samples.rows() - start);
    const Vector lp = log_density_rows(theta.view(), data.samples.middleRows(start, len));
    for (Eigen::Index n = 0; n < len; ++n) {
      if (!std::isfinite(lp[n])) throw NumericError("non-finite log-density", static_cast<std::size_t>(start + n));
      acc += lp[n];
    }
  }
  return -acc / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Baselines

double log_density_schraudolph(std::span<const double> x, const std::vector<Matrix>& covariances,
                               const SupportSet& support) {
  const auto M = support.size();
  if (covariances.size() != M) throw ShapeError("need one covariance per support point");
  const int d = support.dim();
  if (static_cast<int>(x.size()) != d) throw ShapeError("point dimension does not match support");
  require_finite(x);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
  std::vector<double> terms(M);
  for (std::size_t m = 0; m < M; ++m) {
    const Eigen::MatrixXd A = covariances[m];
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw ParameterError("covariance is not positive definite");
    const Eigen::VectorXd diff = xv - support.points.row(static_cast<Eigen::Index>(m)).transpose();
    // A = C C^T, so diff^T A^{-1} diff = |C^{-1} diff|^2
    const Eigen::VectorXd w = llt.matrixL().solve(diff);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    terms[m] = -0.5 * (d * kLog2Pi + log_det + w.squaredNorm());
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(M));
}

KnifeParams schraudolph_params(const std::vector<Matrix>& covariances, const SupportSet& support,
                               Covariance cov) {
  support.validate();
  if (covariances.size() != support.size()) throw ShapeError("need one covariance per support point");
  KnifeParams theta(static_cast<int>(support.size()), support.dim(), cov);
  theta.shifts() = support.points;
  for (int m = 0; m < theta.modes(); ++m) theta.set_covariance(m, covariances[std::size_t(m)]);
  return theta;
}

double log_density_parzen(std::span<const double> x, double bandwidth, const SupportSet& support,
                          KernelId kernel) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ParameterError("bandwidth must be positive");
  if (kernel != KernelId::gaussian) throw UnsupportedKernelError("only the Gaussian kernel is implemented");
  const int d = support.dim();
  if (static_cast<int>(x.size()) != d) throw ShapeError("point dimension does not match support");
  require_finite(x);
  std::vector<double> terms(support.size());
  for (std::size_t m = 0; m < support.size(); ++m) {
    double q = 0.0;
    for (int k = 0; k < d; ++k) {
      const double u = (x[k] - support.points(static_cast<Eigen::Index>(m), k)) / bandwidth;
      q += u * u;
    }
    terms[m] = -0.5 * d * kLog2Pi - 0.5 * q;  // log kappa(u)
  }
  return log_sum_exp(terms) - d * std::log(bandwidth) - std::log(static_cast<double>(support.size()));
}

double log_density_doe(std::span<const double> x, const DoeParams& p) {
  const int d = p.dim();
  if (static_cast<int>(x.size()) != d) throw ShapeError("point dimension does not match parameters");
  if (p.chol_precision.rows() != d || p.chol_precision.cols() != d) throw ShapeError("bad Cholesky factor");
  require_finite(x);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
  Eigen::MatrixXd L = p.chol_precision.triangularView<Eigen::Lower>();
  if (p.diagonal) L = Eigen::MatrixXd(L.diagonal().asDiagonal());
  if ((L.diagonal().array() <= 0.0).any()) throw ParameterError("Cholesky diagonal must be positive");
  const Eigen::VectorXd z = L.transpose() * (xv - p.mean);
  return L.diagonal().array().log().sum() - 0.5 * d * kLog2Pi - 0.5 * z.squaredNorm();
}

}  // namespace knife
