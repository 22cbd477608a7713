#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "rankdehaze/loss.hpp"
#include "rankdehaze/network.hpp"

namespace rankdehaze::nn {

struct GradCheckOptions {
  double step = 1e-4;
  /// Errors above this are reported (not thrown).
  double tolerance = 1e-3;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per
  /// parameter blob (and for the input).
  std::size_t max_coords_per_blob = 0;
  bool include_input = true;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +-step perturbation changed a ReLU mask, pooling
  /// winner or rank order even after shrinking the step to 1e-7. The
  /// function is not differentiable there, so they are left out.
  std::size_t skipped_at_kinks = 0;
  std::string worst_blob;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

using ScalarLoss = std::function<LossResult<double>(std::span<const double>)>;

/// Compares backward() against central finite differences of `loss`
/// composed with the network, over parameters and (optionally) the input.
GradCheckReport grad_check(const Network<double>& network, const Tensor<double>& input,
                           const ScalarLoss& loss, const GradCheckOptions& options = {});

/// Soft-max cross-entropy loss against `target` (0-based class).
GradCheckReport grad_check(const Network<double>& network, const Tensor<double>& input,
                           int target, const GradCheckOptions& options = {});

}  // namespace rankdehaze::nn
