#include "lfrain/nets/dernet.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/synth/rain.hpp"
#include "lfrain/tensor/ops.hpp"

#include <cmath>

namespace lfrain {

Dernet::Dernet(const DernetConfig& cfg) : cfg_(cfg), params_("dernet") {
    if (cfg.width == 0) throw ContractError("dernet width must be positive");
    Rng rng(split_seed(cfg.seed, "dernet"));
    const auto ext = kernel_extents(cfg.conv_mode, 3);
    stem_ = add_conv4d(params_, "stem", 3, cfg.width, ext, rng);
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
        const std::string name = "block" + std::to_string(i);
        Block b;
        b.a = add_conv4d(params_, name + ".a", cfg.width, cfg.width, ext, rng);
        b.b = add_conv4d(params_, name + ".b", cfg.width, cfg.width, ext, rng);
        blocks_.push_back(b);
    }
    head_ = add_conv4d(params_, "head", cfg.width, 1, ext, rng);
}

Tensor Dernet::operator()(const Tensor& derained) const {
    if (derained.rank() != 5 || derained.shape()[1] != 3) {
        throw ShapeError("dernet expects a [S,3,V,h,w] stack, got " + derained.shape().str());
    }
    Tensor x = relu(stem_(params_, permute(derained, 0, 1)));
    for (const Block& b : blocks_) x = add(x, b.b(params_, relu(b.a(params_, x))));
    return permute(softplus(head_(params_, x)), 0, 1);
}

Tensor estimate_depth(const Dernet& net, const Tensor& rainy, const Tensor& rain) {
    if (rainy.shape() != rain.shape()) {
        throw ShapeError("estimate_depth: rainy " + rainy.shape().str() + " vs rain " + rain.shape().str());
    }
    return net(sub(rainy, rain));
}

Tensor fog_from_depth(const Tensor& depth, double beta) {
    auto d = depth.values();
    std::vector<double> a(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) a[i] = fog_value(d[i], beta);
    std::vector<double> slope(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) slope[i] = beta * (1.0 - a[i]);
    return Tensor::from_op(depth.shape(), std::move(a), {depth},
                           [slope = std::move(slope)](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gd = *pg[0];
                               for (std::size_t i = 0; i < g.size(); ++i) gd[i] += g[i] * slope[i];
                           });
}

} // namespace lfrain
