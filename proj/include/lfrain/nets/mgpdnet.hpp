#pragma once

#include "lfrain/nets/layers.hpp"

#include <array>
#include <vector>

namespace lfrain {

struct MgpdnetConfig {
    std::size_t width = 8;
    std::size_t dense_depth = 3;
    std::array<std::size_t, 3> branch_kernels{3, 5, 7};
    ConvMode conv_mode = ConvMode::d4;
    bool bias = true;
    bool nonlocal = true;
    std::uint64_t seed = 1;
};

struct BranchFeatures {
    Tensor f0, f1, f2, f3;
};

struct Detection {
    /// Predicted rain layer [S, 3, V, h, w].
    Tensor rain;
    /// Channel-first [C, S, V, h, w] features.
    BranchFeatures features;
    /// Central-view, central-unit feature map of each branch projected to 3
    /// channels and flattened to length 3hw.
    std::array<Tensor, 3> central;
};

/// Rain-streak detector: 4D conv stem with non-local attention, three dense
/// branches fused progressively, and a 3-channel output conv.
class Mgpdnet {
public:
    explicit Mgpdnet(const MgpdnetConfig& cfg);

    /// stack: [S, 3, V, h, w] with even h and w.
    Detection detect(const Tensor& stack) const;
    /// f0 = NonLocal(ReLU(conv4d(x))) for a channel-first input.
    Tensor stem(const Tensor& channel_first) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const MgpdnetConfig& config() const { return cfg_; }

    /// Input channel width of every dense-layer and fusion convolution, in
    /// registration order, for structural checks.
    std::vector<std::size_t> concat_widths() const;

private:
    struct Branch {
        std::vector<Conv4dLayer> layers;
        Conv4dLayer fuse;
        Conv4dLayer project;
    };
    Tensor nonlocal(const Tensor& x) const;
    Tensor run_branch(const Branch& b, const Tensor& in) const;

    MgpdnetConfig cfg_;
    ParameterSet params_;
    Conv4dLayer stem_;
    LinearLayer theta_, phi_, g_, out_;
    std::array<Branch, 3> branches_;
    Conv4dLayer head_;
};

/// L_s = smooth_l1(R' - R_gt) + lambda_p * perceptual distance.
Tensor supervised_loss(const Tensor& rain, const Tensor& rain_gt, const FeatureExtractor& phi, double lambda_p);

/// L_rain = L_s + L_r.
Tensor rain_loss(const Tensor& supervised, const Tensor& unsupervised);

} // namespace lfrain
