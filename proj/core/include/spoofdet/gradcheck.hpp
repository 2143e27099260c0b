#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spoofdet/tensor.hpp"

namespace spoofdet {

struct GradCheckInput {
  Shape shape;
  std::vector<double> values;
};

struct GradCheckOptions {
  double eps = 1e-5;               // central-difference step
  std::size_t max_coords_per_input = 0;  // 0 = exhaustive
  std::uint64_t seed = 0;          // coordinate sampling stream
  // Central differences estimate a derivative only where the loss is smooth
  // across the probe window. Losses containing branch ops (relu, max
  // pooling) are piecewise-smooth in any single coordinate, so the window
  // is kink-free exactly when both endpoints take identical branches. When
  // set, this hook returns the branch decisions (signs, argmax picks) at an
  // input setting; a coordinate whose endpoints disagree is excluded from
  // the metric and counted instead. The perturbed input's index is passed
  // so implementations can skip inputs that cannot reach a branch.
  std::function<std::vector<std::uint8_t>(std::span<const GradCheckInput>, std::size_t)>
      branch_trace;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_excluded = 0;  // coordinates astride a branch flip
};

// Builds tracked leaves from `inputs`, evaluates `make_loss` (which must
// return a scalar; anything else is a usage error), and compares the tape
// gradient of every (or a seeded sample of) input coordinate against the
// central difference (f(x+eps)-f(x-eps))/(2eps). Relative error per
// coordinate is |a-n| / max(1e-8, |a|+|n|); the maximum is returned.
GradCheckResult grad_check(
    const std::function<Tensor(Tape&, std::span<Tensor>)>& make_loss,
    std::span<const GradCheckInput> inputs, const GradCheckOptions& options = {});

}  // namespace spoofdet
