#pragma once

#include "lfrain/lightfield/lightfield.hpp"
#include "lfrain/nets/layers.hpp"

#include <vector>

namespace lfrain {

struct RnnatConfig {
    std::size_t width = 8;
    std::size_t dstb_blocks = 2;
    std::size_t window = 4;
    bool shifted_windows = false;
    std::size_t stages = 3;
    ConvMode conv_mode = ConvMode::d4;
    std::uint64_t seed = 3;
};

struct Restoration {
    /// Final estimate clamped to [0, 1], [S, 3, V, h, w].
    Tensor restored;
    /// Unclamped running estimate after each stage.
    std::vector<Tensor> stages;
};

/// Recurrent restoration: every stage encodes [estimate, R', A'], updates a
/// convolutional GRU state, refines it with dense window-attention blocks and
/// adds a residual to the running estimate, which starts at the rainy input.
class Rnnat {
public:
    explicit Rnnat(const RnnatConfig& cfg);

    /// rainy, rain: [S, 3, V, h, w]; fog: [S, 1, V, h, w].
    Restoration restore(const Tensor& rainy, const Tensor& rain, const Tensor& fog) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const RnnatConfig& config() const { return cfg_; }

    /// Single-head self-attention inside non-overlapping window x window
    /// tiles of every sub-view; x is channel-first [c, S, V, h, w]. Output
    /// is the attention result only (no residual).
    Tensor window_attention(std::size_t block, const Tensor& x) const;

private:
    struct Dstb {
        LinearLayer q, k, v, out;
        Conv4dLayer conv1, conv2, fuse;
    };
    Tensor dstb(const Dstb& b, std::size_t index, const Tensor& x) const;

    RnnatConfig cfg_;
    ParameterSet params_;
    Conv4dLayer stem_, update_, reset_, candidate_;
    std::vector<Dstb> blocks_;
    Conv4dLayer head_;
};

/// Strided conv3d stack over sub-view stacks flattened to one multi-channel
/// image, global average, linear logit. Probabilities come from a logit
/// clamped to +-kLogitClamp, so they stay inside [1e-6, 1 - 1e-6].
class Discriminator {
public:
    static constexpr double kLogitClamp = 13.815509557963773; // log((1 - 1e-6) / 1e-6)

    Discriminator(std::string name, std::size_t views, std::size_t width, std::uint64_t seed);

    /// stacks: each [S, 3, V, h, w] with identical shapes. Returns [N] probabilities.
    Tensor operator()(const std::vector<Tensor>& stacks) const;
    Tensor operator()(const Tensor& stack) const { return (*this)(std::vector<Tensor>{stack}); }

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

private:
    ParameterSet params_;
    std::size_t in_channels_;
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
    LinearLayer fc_;
};

/// N_p co-located patches, drawn once per step and applied to real and fake.
std::vector<PatchSpec> sample_disc_patches(std::size_t height, std::size_t width, std::size_t patch, std::size_t count,
                                           std::uint64_t seed);

/// Y_gt surrogate for unlabelled scenes: clamp(I - R', 0, 1).
Tensor pseudo_gt_views(const Tensor& rainy, const Tensor& rain);

/// mean |Y' - Y_gt| + lambda_pg * perceptual distance.
Tensor generator_loss(const Tensor& restored, const Tensor& truth, const FeatureExtractor& phi, double lambda_pg);

struct GanLosses {
    Tensor global, local;
};
/// -log D(real) - log(1 - D(fake)) for the global net and averaged over the
/// co-located patches for the local net.
GanLosses gan_losses(const Tensor& fake, const Tensor& real, const Discriminator& dg, const Discriminator& dl,
                     const std::vector<PatchSpec>& patches);
/// Generator-side adversarial term. Non-saturating: -log D_g(Y') - mean_p log
/// D_l(Y'_p). Literal: the discriminator objective itself (its real terms
/// carry no generator gradient).
GanLosses generator_adversarial(const Tensor& fake, const Tensor& real, const Discriminator& dg,
                                const Discriminator& dl, const std::vector<PatchSpec>& patches, bool literal);

/// L_derain = L_g + lambda_gan (L_gan_global + L_gan_local).
Tensor derain_loss(const Tensor& lg, const Tensor& gan_global, const Tensor& gan_local, double lambda_gan);
/// L_total = L_rain + L_derain.
Tensor total_loss(const Tensor& rain_loss, const Tensor& derain);

} // namespace lfrain
