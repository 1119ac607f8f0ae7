#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace knife {

// Row-major so that every sample is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline std::span<const double> row(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

// Independent, reproducible sub-stream of `seed` identified by `stream`.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// N x d i.i.d. samples, optionally paired with discrete labels or a
/// continuous conditioning matrix (one row per sample).
struct Dataset {
  Matrix samples;
  std::optional<std::vector<int>> labels;
  std::optional<Matrix> cond;

  std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }

  // Throws InputDomainError / ShapeError when the invariants do not hold.
  void validate() const;

  Dataset rows(const std::vector<std::size_t>& idx) const;
};

/// Kernel support E = {x'_m}; used as Parzen/Schraudolph centers or to
/// initialize KNIFE shifts.
struct SupportSet {
  Matrix points;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

// Draws `n` samples for training epoch `epoch`. Samplers are how the
// training drivers consume either a fixed dataset or a fresh stream.
using Sampler = std::function<Matrix(std::size_t epoch, std::size_t n, Rng& rng)>;

struct PairBatch {
  Matrix x;
  Matrix y;
};
using PairSampler = std::function<PairBatch(std::size_t epoch, std::size_t n, Rng& rng)>;

// Uniform resampling with replacement from a fixed dataset.
Sampler resampler(const Dataset& data);
PairSampler pair_resampler(const Dataset& data);

}  // namespace knife
