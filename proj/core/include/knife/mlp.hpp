#pragma once

#include "knife/types.hpp"

namespace knife {

/// Two affine layers with a tanh hidden layer: out = W2 tanh(W1 x + b1) + b2.
///
/// All weights live in one flat vector so optimizers and gradient checks can
/// treat the network as a single parameter block. Layout:
///   [ W1 (hidden x in, row-major) | b1 (hidden) | W2 (out x hidden, row-major) | b2 (out) ]
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int hidden, int out);

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(Rng& rng);

  int in_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  int out_dim() const { return out_; }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Eigen::Map<Matrix> w1();
  Eigen::Map<const Matrix> w1() const;
  Eigen::Map<Vector> b1();
  Eigen::Map<const Vector> b1() const;
  Eigen::Map<Matrix> w2();
  Eigen::Map<const Matrix> w2() const;
  Eigen::Map<Vector> b2();
  Eigen::Map<const Vector> b2() const;

  struct Cache {
    Matrix hidden;  // tanh activations, N x hidden
  };

  // inputs: N x in. Returns N x out.
  Matrix forward(const Matrix& inputs, Cache* cache = nullptr) const;

  // Accumulates d loss / d values into `grad` (size()) given d loss / d out.
  void backward(const Matrix& inputs, const Cache& cache, const Matrix& d_out, Vector& grad) const;

 private:
  int in_ = 0;
  int hidden_ = 0;
  int out_ = 0;
  Vector values_;
};

}  // namespace knife
