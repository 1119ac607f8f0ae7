#include "knife/types.hpp"

#include <cmath>

#include "knife/errors.hpp"

namespace knife {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6b6e6966u};
  return Rng(seq);
}

void Dataset::validate() const {
  if (samples.rows() < 1 || samples.cols() < 1) throw ShapeError("dataset must be non-empty");
  if (!samples.allFinite()) throw InputDomainError("dataset contains non-finite samples");
  if (labels && labels->size() != size()) throw ShapeError("label count does not match sample count");
  if (cond) {
    if (static_cast<std::size_t>(cond->rows()) != size())
      throw ShapeError("conditioning rows do not match sample count");
    if (!cond->allFinite()) throw InputDomainError("conditioning data contains non-finite values");
  }
}

Dataset Dataset::rows(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.samples.resize(static_cast<Eigen::Index>(idx.size()), samples.cols());
  if (labels) out.labels.emplace();
  if (cond) out.cond.emplace(static_cast<Eigen::Index>(idx.size()), cond->cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.samples.row(r) = samples.row(static_cast<Eigen::Index>(idx[i]));
    if (labels) out.labels->push_back((*labels)[idx[i]]);
    if (cond) out.cond->row(r) = cond->row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

void SupportSet::validate() const {
  if (points.rows() < 1 || points.cols() < 1) throw ShapeError("support set must be non-empty");
  if (!points.allFinite()) throw InputDomainError("support set contains non-finite points");
}

Sampler resampler(const Dataset& data) {
  data.validate();
  return [&data](std::size_t, std::size_t n, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> pick(0, data.samples.rows() - 1);
    Matrix out(static_cast<Eigen::Index>(n), data.samples.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = data.samples.row(pick(rng));
    return out;
  };
}

PairSampler pair_resampler(const Dataset& data) {
  data.validate();
  if (!data.cond) throw ShapeError("paired resampling needs a conditioning matrix");
  return [&data](std::size_t, std::size_t n, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> pick(0, data.samples.rows() - 1);
    PairBatch out{Matrix(static_cast<Eigen::Index>(n), data.samples.cols()),
                  Matrix(static_cast<Eigen::Index>(n), data.cond->cols())};
    for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
      const auto j = pick(rng);
      out.x.row(i) = data.samples.row(j);
      out.y.row(i) = data.cond->row(j);
    }
    return out;
  };
}

}  // namespace knife
