#include "lfrain/nets/layers.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/conv.hpp"
#include "lfrain/tensor/ops.hpp"

namespace lfrain {

ConvMode parse_conv_mode(const std::string& s) {
    if (s == "2d") return ConvMode::d2;
    if (s == "3d") return ConvMode::d3;
    if (s == "4d") return ConvMode::d4;
    throw FormatError("conv_mode must be 2d, 3d or 4d, got '" + s + "'");
}

std::string to_string(ConvMode m) {
    switch (m) {
    case ConvMode::d2: return "2d";
    case ConvMode::d3: return "3d";
    case ConvMode::d4: return "4d";
    }
    return "?";
}

std::array<std::size_t, 4> kernel_extents(ConvMode mode, std::size_t k) {
    switch (mode) {
    case ConvMode::d2: return {1, 1, k, k};
    case ConvMode::d3: return {1, k, k, k};
    case ConvMode::d4: return {k, k, k, k};
    }
    return {k, k, k, k};
}

Tensor Conv4dLayer::operator()(const ParameterSet& params, const Tensor& x) const {
    ConvKernel4d k{params[weights], has_bias ? params[bias] : Tensor{}};
    return conv4d(x, k);
}

Conv4dLayer add_conv4d(ParameterSet& params, const std::string& name, std::size_t in_channels,
                       std::size_t out_channels, std::array<std::size_t, 4> e, Rng& rng, bool bias, bool trainable) {
    Conv4dLayer layer;
    const std::size_t fan_in = in_channels * e[0] * e[1] * e[2] * e[3];
    layer.weights =
        params.add_uniform(name + ".w", Shape{out_channels, in_channels, e[0], e[1], e[2], e[3]}, fan_in, rng, trainable);
    if (bias) {
        layer.bias = params.add_zeros(name + ".b", Shape{out_channels}, trainable);
        layer.has_bias = true;
    }
    return layer;
}

Tensor LinearLayer::operator()(const ParameterSet& params, const Tensor& x) const {
    Tensor y = matmul(params[weights], x);
    if (has_bias) y = add_channel_bias(y, params[bias], 0);
    return y;
}

LinearLayer add_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       bool bias) {
    LinearLayer l;
    l.weights = params.add_uniform(name + ".w", Shape{out, in}, in, rng);
    if (bias) {
        l.bias = params.add_zeros(name + ".b", Shape{out});
        l.has_bias = true;
    }
    return l;
}

Tensor smooth_l1(const Tensor& x) {
    auto xv = x.values();
    double acc = 0.0;
    for (double v : xv) {
        const double a = std::abs(v);
        acc += a < 1.0 ? 0.5 * v * v : a - 0.5;
    }
    const double n = static_cast<double>(xv.size());
    return Tensor::from_op(Shape{1}, {acc / n}, {x}, [x, n](std::span<const double> g, std::span<std::vector<double>* const> pg) {
        auto xv = x.values();
        auto& gx = *pg[0];
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double v = xv[i];
            const double d = std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0);
            gx[i] += g[0] * d / n;
        }
    });
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed) : params_("phi") {
    Rng rng(split_seed(seed, "perceptual"));
    const std::size_t ch[4] = {3, 8, 16, 16};
    for (std::size_t l = 0; l < 3; ++l) {
        w_[l] = params_.add_uniform("conv" + std::to_string(l) + ".w", Shape{ch[l + 1], ch[l], 1, 3, 3}, ch[l] * 9, rng);
        b_[l] = params_.add_zeros("conv" + std::to_string(l) + ".b", Shape{ch[l + 1]});
    }
    params_.freeze();
}

Tensor FeatureExtractor::features(const Tensor& images) const {
    if (images.rank() != 4 || images.shape()[1] != 3) {
        throw ShapeError("perceptual features need [N,3,h,w] images, got " + images.shape().str());
    }
    const Shape& s = images.shape();
    Tensor x = reshape(images, Shape{s[0], 3, 1, s[2], s[3]});
    for (std::size_t l = 0; l < 3; ++l) x = subsample2(relu(conv3d(x, params_[w_[l]], params_[b_[l]])));
    return x;
}

Tensor FeatureExtractor::stack_features(const Tensor& stack) const {
    if (stack.rank() != 5 || stack.shape()[1] != 3) {
        throw ShapeError("perceptual features need an [S,3,V,h,w] stack, got " + stack.shape().str());
    }
    const Shape& s = stack.shape();
    // [S,3,V,h,w] -> [S,V,3,h,w] -> [S*V,3,h,w]
    return features(reshape(permute(stack, 1, 2), Shape{s[0] * s[2], 3, s[3], s[4]}));
}

Tensor FeatureExtractor::vector_features(const Tensor& flat, std::size_t h, std::size_t w) const {
    if (flat.numel() != 3 * h * w) throw ShapeError("feature vector length does not match 3x" + std::to_string(h) + "x" + std::to_string(w));
    return features(reshape(flat, Shape{1, 3, h, w}));
}

Tensor perceptual_distance(const FeatureExtractor& phi, const Tensor& a, const Tensor& b) {
    return mean(square(sub(phi.stack_features(a), phi.stack_features(b))));
}

} // namespace lfrain
