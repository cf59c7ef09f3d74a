#pragma once

#include "lfrain/tensor/tensor.hpp"

#include <cstdint>
#include <functional>

namespace lfrain {

/// Compares reverse-mode gradients of a scalar function against central
/// differences at up to `samples` coordinates of `x` (all of them when
/// samples >= numel). Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Throws NumericError when f produces a non-finite value.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, std::size_t samples,
                         double h, std::uint64_t seed = 0);

} // namespace lfrain

namespace lfrain {

class ParameterSet;

/// Central-difference check over `samples` randomly chosen coordinates of
/// the trainable parameters in `params`. `loss` must read the current
/// parameter values on every call.
double finite_diff_check_params(const std::function<Tensor()>& loss, ParameterSet& params, std::size_t samples,
                                double h, std::uint64_t seed = 0);

} // namespace lfrain
