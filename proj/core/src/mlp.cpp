#include "knife/mlp.hpp"

#include <cmath>

#include "knife/errors.hpp"

namespace knife {

Mlp::Mlp(int in, int hidden, int out) : in_(in), hidden_(hidden), out_(out) {
  if (in < 1 || hidden < 1 || out < 1) throw ParameterError("Mlp layer sizes must be positive");
  values_ = Vector::Zero(Eigen::Index(hidden) * in + hidden + Eigen::Index(out) * hidden + out);
}

void Mlp::init_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(in_), 1.0 / std::sqrt(in_));
  std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(hidden_), 1.0 / std::sqrt(hidden_));
  const Eigen::Index first = Eigen::Index(hidden_) * in_ + hidden_;
  for (Eigen::Index i = 0; i < first; ++i) values_[i] = u1(rng);
  for (Eigen::Index i = first; i < values_.size(); ++i) values_[i] = u2(rng);
}

Eigen::Map<Matrix> Mlp::w1() { return {values_.data(), hidden_, in_}; }
Eigen::Map<const Matrix> Mlp::w1() const { return {values_.data(), hidden_, in_}; }
Eigen::Map<Vector> Mlp::b1() { return {values_.data() + Eigen::Index(hidden_) * in_, hidden_}; }
Eigen::Map<const Vector> Mlp::b1() const { return {values_.data() + Eigen::Index(hidden_) * in_, hidden_}; }
Eigen::Map<Matrix> Mlp::w2() {
  return {values_.data() + Eigen::Index(hidden_) * in_ + hidden_, out_, hidden_};
}
Eigen::Map<const Matrix> Mlp::w2() const {
  return {values_.data() + Eigen::Index(hidden_) * in_ + hidden_, out_, hidden_};
}
Eigen::Map<Vector> Mlp::b2() { return {values_.data() + values_.size() - out_, out_}; }
Eigen::Map<const Vector> Mlp::b2() const { return {values_.data() + values_.size() - out_, out_}; }

Matrix Mlp::forward(const Matrix& inputs, Cache* cache) const {
  if (inputs.cols() != in_) throw ShapeError("Mlp input has wrong width");
  Matrix h = inputs * w1().transpose();
  h.rowwise() += b1().transpose();
  h = h.array().tanh();
  Matrix out = h * w2().transpose();
  out.rowwise() += b2().transpose();
  if (cache) cache->hidden = std::move(h);
  return out;
}

void Mlp::backward(const Matrix& inputs, const Cache& cache, const Matrix& d_out, Vector& grad) const {
  if (d_out.rows() != inputs.rows() || d_out.cols() != out_) throw ShapeError("Mlp output gradient has wrong shape");
  if (grad.size() != values_.size()) throw ShapeError("Mlp gradient buffer has wrong size");
  const Eigen::Index o_w2 = Eigen::Index(hidden_) * in_ + hidden_;
  Eigen::Map<Matrix> g_w1(grad.data(), hidden_, in_);
  Eigen::Map<Vector> g_b1(grad.data() + Eigen::Index(hidden_) * in_, hidden_);
  Eigen::Map<Matrix> g_w2(grad.data() + o_w2, out_, hidden_);
  Eigen::Map<Vector> g_b2(grad.data() + grad.size() - out_, out_);

  g_w2.noalias() += d_out.transpose() * cache.hidden;
  g_b2 += d_out.colwise().sum().transpose();
  const Matrix d_pre = ((d_out * w2()).array() * (1.0 - cache.hidden.array().square())).matrix();
  g_w1.noalias() += d_pre.transpose() * inputs;
  g_b1 += d_pre.colwise().sum().transpose();
}

}  // namespace knife
