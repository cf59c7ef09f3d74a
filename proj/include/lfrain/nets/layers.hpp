#pragma once

#include "lfrain/tensor/params.hpp"

#include <array>
#include <string>

namespace lfrain {

/// Which axes of (S, V, H, W) a network's convolutions span. `d4` is the full
/// 4D kernel, `d3` drops the unit axis (per-unit 3D kernels) and `d2` keeps
/// only the spatial axes (per-view 2D kernels).
enum class ConvMode { d2, d3, d4 };

ConvMode parse_conv_mode(const std::string& s);
std::string to_string(ConvMode m);

/// Kernel extents for a nominal size k under a convolution mode.
std::array<std::size_t, 4> kernel_extents(ConvMode mode, std::size_t k);

/// Handles of one 4D convolution registered in a ParameterSet.
struct Conv4dLayer {
    std::size_t weights = 0;
    std::size_t bias = 0;
    bool has_bias = false;

    Tensor operator()(const ParameterSet& params, const Tensor& x) const;
    std::size_t in_channels(const ParameterSet& params) const { return params[weights].shape()[1]; }
    std::size_t out_channels(const ParameterSet& params) const { return params[weights].shape()[0]; }
};

/// Uniform weights in +-1/sqrt(fan_in), zero bias.
Conv4dLayer add_conv4d(ParameterSet& params, const std::string& name, std::size_t in_channels,
                       std::size_t out_channels, std::array<std::size_t, 4> extents, Rng& rng, bool bias = true,
                       bool trainable = true);

/// Dense [out, in] matrix plus optional bias vector.
struct LinearLayer {
    std::size_t weights = 0;
    std::size_t bias = 0;
    bool has_bias = false;

    /// x: [in, N] -> [out, N].
    Tensor operator()(const ParameterSet& params, const Tensor& x) const;
};

LinearLayer add_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       bool bias = true);

/// Mean of 0.5 x^2 for |x| < 1 and |x| - 0.5 otherwise.
Tensor smooth_l1(const Tensor& x);

/// Fixed-seed perceptual proxy: three 3x3 convolutions (8, 16, 16 channels),
/// each followed by ReLU and a stride-2 subsample, applied to every view.
/// Its weights are frozen at construction.
class FeatureExtractor {
public:
    explicit FeatureExtractor(std::uint64_t seed = 0x5eed);

    /// images: [N, 3, h, w].
    Tensor features(const Tensor& images) const;
    /// stack: [S, 3, V, h, w]; every sub-view becomes one image.
    Tensor stack_features(const Tensor& stack) const;
    /// Flat length-3hw vector viewed as one 3-channel image.
    Tensor vector_features(const Tensor& flat, std::size_t h, std::size_t w) const;

    std::uint64_t checksum() const { return params_.checksum(); }

private:
    ParameterSet params_;
    std::array<std::size_t, 3> w_{}, b_{};
};

/// mean((phi(a) - phi(b))^2) over sub-view stacks.
Tensor perceptual_distance(const FeatureExtractor& phi, const Tensor& a, const Tensor& b);

} // namespace lfrain
