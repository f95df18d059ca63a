#pragma once

#include <cstdint>
#include <string>

#include "pgen/network.hpp"

namespace pgen {

/// Relative error floor: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = 0;
  std::size_t coordinates = 0;
};

/// The tiny network the gradient check runs on: V=5, L=3, every width 4, no
/// dropout.
NetworkConfig gradcheck_config(Preset preset, CellType cell);

/// Compares backward_window against central finite differences of the
/// cross-entropy loss at a random parameter point (every entry drawn from
/// U(-0.8, 0.8)) with a random window and target.
GradCheckResult gradient_check(const NetworkConfig& config, std::uint64_t seed,
                               double epsilon);

}  // namespace pgen
