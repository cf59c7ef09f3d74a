#include "lfrain/tensor/conv.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/conv_kernels.hpp"
#include "lfrain/tensor/ops.hpp"

#include <algorithm>

namespace lfrain {

Tensor conv3d(const Tensor& x, const Tensor& weights) {
    if (x.rank() == 4) {
        const auto& d = x.shape().dims();
        Tensor batched = reshape(x, Shape{1, d[0], d[1], d[2], d[3]});
        Tensor y = conv3d(batched, weights);
        const auto& yd = y.shape().dims();
        return reshape(y, Shape{yd[1], yd[2], yd[3], yd[4]});
    }
    if (x.rank() != 5 || weights.rank() != 5) {
        throw ShapeError("conv3d: expected [N,C,D1,D2,D3] input and [Co,Ci,k1,k2,k3] weights, got " +
                         x.shape().str() + " and " + weights.shape().str());
    }
    const Shape& xs = x.shape();
    const Shape& ws = weights.shape();
    if (xs[1] != ws[1]) {
        throw ShapeError("conv3d: channel mismatch, input has " + std::to_string(xs[1]) + ", weights expect " +
                         std::to_string(ws[1]));
    }
    Conv3dGeometry g;
    g.batch = xs[0];
    g.in_channels = xs[1];
    g.out_channels = ws[0];
    g.extent = {xs[2], xs[3], xs[4]};
    g.kernel = {ws[2], ws[3], ws[4]};
    g.validate();

    std::vector<double> y(g.output_size());
    kernels::conv3d_forward(g, x.values(), weights.values(), y);
    return Tensor::from_op(Shape{g.batch, g.out_channels, xs[2], xs[3], xs[4]}, std::move(y), {x, weights},
                           [x, weights, g](std::span<const double> go, std::span<std::vector<double>* const> pg) {
                               if (pg[0]) kernels::conv3d_backward_input(g, go, weights.values(), *pg[0]);
                               if (pg[1]) kernels::conv3d_backward_weight(g, go, x.values(), *pg[1]);
                           });
}

Tensor conv3d(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    Tensor y = conv3d(x, weights);
    return add_channel_bias(y, bias, y.rank() == 5 ? 1 : 0);
}

void ConvKernel4d::validate() const {
    if (!weights.defined() || weights.rank() != 6) {
        throw ShapeError("conv4d weights must have shape [Co,Ci,ks,kv,kh,kw]");
    }
    for (std::size_t a = 2; a < 6; ++a) {
        if (weights.shape()[a] % 2 == 0) throw ShapeError("conv4d kernel extents must be odd, got " + weights.shape().str());
    }
    if (bias.defined() && bias.numel() != weights.shape()[0]) {
        throw ShapeError("conv4d bias length does not match output channels");
    }
}

namespace {

void check_conv4d_input(const Tensor& x, const ConvKernel4d& kernel) {
    kernel.validate();
    if (x.rank() != 5) throw ShapeError("conv4d: expected [C,S,V,H,W] input, got " + x.shape().str());
    const Shape& ws = kernel.weights.shape();
    if (x.shape()[0] != ws[1]) {
        throw ShapeError("conv4d: channel mismatch, input has " + std::to_string(x.shape()[0]) +
                         ", kernel expects " + std::to_string(ws[1]));
    }
}

} // namespace

Tensor conv4d(const Tensor& x, const ConvKernel4d& kernel) {
    check_conv4d_input(x, kernel);
    const Shape& ws = kernel.weights.shape();
    const Shape& xs = x.shape();
    Conv3dGeometry g;
    g.batch = xs[1];
    g.in_channels = xs[0];
    g.out_channels = ws[0];
    g.extent = {xs[2], xs[3], xs[4]};
    g.kernel = {ws[3], ws[4], ws[5]};
    g.validate();
    const std::size_t ks = ws[2];

    Tensor unit_major = permute(x, 0, 1);
    Tensor taps_first = transpose(kernel.weights, {2, 0, 1, 3, 4, 5});
    std::vector<double> y(g.output_size());
    kernels::conv4d_forward(g, ks, unit_major.values(), taps_first.values(), y);
    Tensor acc = Tensor::from_op(
        Shape{g.batch, g.out_channels, xs[2], xs[3], xs[4]}, std::move(y), {unit_major, taps_first},
        [unit_major, taps_first, g, ks](std::span<const double> go, std::span<std::vector<double>* const> pg) {
            if (pg[0]) kernels::conv4d_backward_input(g, ks, go, taps_first.values(), *pg[0]);
            if (pg[1]) kernels::conv4d_backward_weight(g, ks, go, unit_major.values(), *pg[1]);
        });
    Tensor out = permute(acc, 0, 1);
    if (kernel.bias.defined()) out = add_channel_bias(out, kernel.bias, 0);
    return out;
}

Tensor conv4d_composed(const Tensor& x, const ConvKernel4d& kernel) {
    check_conv4d_input(x, kernel);
    const Shape& ws = kernel.weights.shape();
    const std::ptrdiff_t units = static_cast<std::ptrdiff_t>(x.shape()[1]);
    const std::ptrdiff_t ks = static_cast<std::ptrdiff_t>(ws[2]);
    const std::size_t co = ws[0], ci = ws[1];

    // [C,S,V,H,W] -> [S,C,V,H,W]: every 3D-EPI unit is one batch entry.
    Tensor unit_major = permute(x, 0, 1);

    Tensor acc;
    for (std::ptrdiff_t tap = 0; tap < ks; ++tap) {
        const std::ptrdiff_t offset = tap - ks / 2;
        // Output unit s reads input unit s + offset.
        const std::ptrdiff_t out_begin = std::max<std::ptrdiff_t>(0, -offset);
        const std::ptrdiff_t out_end = std::min<std::ptrdiff_t>(units, units - offset);
        if (out_begin >= out_end) continue;
        Tensor w_tap = reshape(slice(kernel.weights, 2, static_cast<std::size_t>(tap), static_cast<std::size_t>(tap) + 1),
                               Shape{co, ci, ws[3], ws[4], ws[5]});
        Tensor src = unit_major;
        if (out_end - out_begin != units) {
            src = slice(unit_major, 0, static_cast<std::size_t>(out_begin + offset),
                        static_cast<std::size_t>(out_end + offset));
        }
        Tensor y = conv3d(src, w_tap);
        y = pad(y, 0, static_cast<std::size_t>(out_begin), static_cast<std::size_t>(units - out_end));
        acc = acc.defined() ? add(acc, y) : y;
    }
    Tensor out = permute(acc, 0, 1);
    if (kernel.bias.defined()) out = add_channel_bias(out, kernel.bias, 0);
    return out;
}

} // namespace lfrain
