#pragma once

#include <array>
#include <cstddef>
#include <span>

// Raw 3D cross-correlation kernels with "same" zero padding and unit stride.
//
// Two implementations are kept side by side: `kernels::` is the OpenMP
// row-vectorised path used by the autodiff ops, `kernels::reference::` is the
// plain serial nested-loop version kept for tests and benchmarking. Both
// produce per-element sums in a fixed order, so results do not depend on the
// thread count.

namespace lfrain {

struct Conv3dGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::array<std::size_t, 3> extent{1, 1, 1};
    std::array<std::size_t, 3> kernel{1, 1, 1};

    std::size_t volume() const { return extent[0] * extent[1] * extent[2]; }
    std::size_t taps() const { return kernel[0] * kernel[1] * kernel[2]; }
    std::size_t input_size() const { return batch * in_channels * volume(); }
    std::size_t output_size() const { return batch * out_channels * volume(); }
    std::size_t weight_size() const { return out_channels * in_channels * taps(); }
    std::size_t pad(std::size_t axis) const { return kernel[axis] / 2; }
    /// Throws ShapeError on even kernels or mismatched buffer sizes.
    void validate() const;
};

namespace kernels {

/// out = conv(in, w). `out` is overwritten.
void conv3d_forward(const Conv3dGeometry& g, std::span<const double> in, std::span<const double> w,
                    std::span<double> out);
/// grad_in += conv^T(grad_out, w).
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in);
/// grad_w += correlation of grad_out with in.
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_w);

// Unit-axis-fused 4D variants. `g.batch` is the unit count S, input and output
// are unit-major [S, C, D1, D2, D3], and `w` is laid out [k_s, C_out, C_in,
// k1, k2, k3]: tap t of the unit axis pairs output unit s with input unit
// s + t - k_s / 2. Each input unit is unrolled once and multiplied against all
// k_s tap slices in one product.
void conv4d_forward(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> in,
                    std::span<const double> w, std::span<double> out);
void conv4d_backward_input(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> grad_out,
                           std::span<const double> w, std::span<double> grad_in);
void conv4d_backward_weight(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_w);

namespace reference {

void conv3d_forward(const Conv3dGeometry& g, std::span<const double> in, std::span<const double> w,
                    std::span<double> out);
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in);
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_w);

} // namespace reference
} // namespace kernels
} // namespace lfrain
