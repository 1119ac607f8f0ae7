#pragma once

#include <string>
#include <vector>

#include "knife/types.hpp"

namespace knife::harness {

struct GradcheckResult {
  std::string kind;  // "density-diagonal", "density-full", "conditioner", "discriminator"
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
};

/// `count` random instances cycling through the four kinds; instance i uses
/// seed base_seed + i. Parameters are drawn at moderate scale so every
/// component carries non-negligible responsibility for the batch.
std::vector<GradcheckResult> run_gradcheck_suite(std::size_t count, std::uint64_t base_seed, double step);

}  // namespace knife::harness
