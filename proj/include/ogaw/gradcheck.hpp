#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ogaw/tensor.hpp"

namespace ogaw {

struct GradCheckResult {
  /// max over checked elements of |a-n| / max(1e-8, |a|+|n|)
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose ±epsilon probes flipped a relu mask or maxpool argmax.
  std::size_t skipped_at_kinks = 0;
  bool non_finite = false;
  std::string worst;  // "input <i> element <j>: analytic a numeric n"

  bool passed(double tolerance) const { return !non_finite && max_relative_error <= tolerance; }
};

using GradCheckFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares tape gradients of `fn` with central differences
/// (f(x+eps) - f(x-eps)) / 2eps for every element of every input.
///
/// Non-scalar outputs are contracted with a fixed pseudo-random weighting
/// first. Coordinates where a probe crosses a piecewise-linear kink are
/// excluded and counted instead of compared. Inputs are perturbed in place
/// and restored bitwise.
GradCheckResult gradient_check(const GradCheckFn& fn, std::vector<Tensor> inputs, double epsilon = 1e-5);

namespace detail {

/// Folds an activation pattern into the active kink signature, if any.
void note_kink_pattern(std::uint64_t pattern_hash);
bool kink_monitor_active() noexcept;

}  // namespace detail

}  // namespace ogaw
