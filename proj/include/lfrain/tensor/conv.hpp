#pragma once

#include "lfrain/tensor/tensor.hpp"

namespace lfrain {

/// Same-padded, unit-stride 3D cross-correlation.
/// x: [N, C_in, D1, D2, D3] (or unbatched [C_in, D1, D2, D3]);
/// weights: [C_out, C_in, k1, k2, k3] with odd extents.
Tensor conv3d(const Tensor& x, const Tensor& weights);
/// As above plus a per-output-channel bias of shape [C_out].
Tensor conv3d(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// Weights [C_out, C_in, k_s, k_v, k_h, k_w] and bias [C_out] of a 4D layer.
struct ConvKernel4d {
    Tensor weights;
    Tensor bias; ///< may be undefined for bias-free layers

    std::size_t out_channels() const { return weights.shape()[0]; }
    std::size_t in_channels() const { return weights.shape()[1]; }
    /// Throws ShapeError unless rank 6 with odd extents and a matching bias.
    void validate() const;
};

/// 4D cross-correlation over (S, V, H, W) for channel-first input
/// [C_in, S, V, H, W]. The unit axis S is swapped to the front so each unit is
/// one batch entry of a 3D convolution; the k_s unit-axis taps become k_s
/// shifted conv3d calls whose results are summed.
Tensor conv4d_composed(const Tensor& x, const ConvKernel4d& kernel);
/// Same result as conv4d_composed, with the k_s shifted conv3d calls fused
/// into one kernel that unrolls each input unit once.
Tensor conv4d(const Tensor& x, const ConvKernel4d& kernel);

} // namespace lfrain
