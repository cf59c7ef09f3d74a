#pragma once

#include "lfrain/nets/layers.hpp"

#include <vector>

namespace lfrain {

struct DernetConfig {
    std::size_t width = 8;
    std::size_t blocks = 3;
    ConvMode conv_mode = ConvMode::d4;
    std::uint64_t seed = 2;
};

/// Depth estimator: conv4d stem, residual conv4d blocks and a 1-channel head
/// with a softplus so the output is non-negative.
class Dernet {
public:
    explicit Dernet(const DernetConfig& cfg);

    /// derained: [S, 3, V, h, w] -> depth [S, 1, V, h, w].
    Tensor operator()(const Tensor& derained) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const DernetConfig& config() const { return cfg_; }
    void freeze() { params_.freeze(); }
    bool frozen() const { return params_.frozen(); }

private:
    struct Block {
        Conv4dLayer a, b;
    };
    DernetConfig cfg_;
    ParameterSet params_;
    Conv4dLayer stem_;
    std::vector<Block> blocks_;
    Conv4dLayer head_;
};

/// D' = DERNet(I - R').
Tensor estimate_depth(const Dernet& net, const Tensor& rainy, const Tensor& rain);

/// A' = 1 - exp(-beta D'), elementwise through the same scalar formula the
/// synthesiser uses. Throws DomainError on negative depth.
Tensor fog_from_depth(const Tensor& depth, double beta);

} // namespace lfrain
