#pragma once

#include "lfrain/tensor/tensor.hpp"

#include <cstddef>
#include <vector>

namespace lfrain {

// Elementwise. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor relu(const Tensor& x);
/// Gradient is zero wherever the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor exp(const Tensor& x);
/// Throws DomainError on any non-positive input.
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);

// Reductions to a shape-[1] scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor l2_norm(const Tensor& x);
/// Mean over the last axis; the result drops that axis (rank >= 2).
Tensor mean_last(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched matmul: [B,m,k] x [B,k,n] -> [B,m,n].
Tensor bmm(const Tensor& a, const Tensor& b);
Tensor softmax_last(const Tensor& x);

// Layout.
Tensor reshape(const Tensor& x, Shape shape);
/// General axis permutation: output axis i is input axis perm[i].
Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm);
/// Swaps two axes.
Tensor permute(const Tensor& x, std::size_t axis_a, std::size_t axis_b);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Zero padding along one axis.
Tensor pad(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after);
/// Adds bias[c] to every element whose index along `axis` is c.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias, std::size_t axis);

// Spatial resampling over the last two axes.
Tensor avg_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);
/// Keeps even indices of the last two axes (output ceil(n/2)).
Tensor subsample2(const Tensor& x);

} // namespace lfrain
