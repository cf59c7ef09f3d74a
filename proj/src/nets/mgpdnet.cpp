#include "lfrain/nets/mgpdnet.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/ops.hpp"

#include <cmath>

namespace lfrain {

Mgpdnet::Mgpdnet(const MgpdnetConfig& cfg) : cfg_(cfg), params_("mgpdnet") {
    if (cfg.width == 0 || cfg.dense_depth == 0) throw ContractError("mgpdnet width and dense depth must be positive");
    Rng rng(split_seed(cfg.seed, "mgpdnet"));
    const std::size_t c = cfg.width;
    const std::size_t e = std::max<std::size_t>(1, c / 2);
    stem_ = add_conv4d(params_, "stem", 3, c, kernel_extents(cfg.conv_mode, 3), rng, cfg.bias);
    theta_ = add_linear(params_, "nonlocal.theta", c, e, rng, false);
    phi_ = add_linear(params_, "nonlocal.phi", c, e, rng, false);
    g_ = add_linear(params_, "nonlocal.g", c, e, rng, false);
    out_ = add_linear(params_, "nonlocal.out", e, c, rng, cfg.bias);
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string name = "branch" + std::to_string(k + 1);
        const auto ext = kernel_extents(cfg.conv_mode, cfg.branch_kernels[k]);
        const std::size_t in = (k + 1) * c;
        Branch& b = branches_[k];
        for (std::size_t l = 0; l < cfg.dense_depth; ++l) {
            b.layers.push_back(add_conv4d(params_, name + ".dense" + std::to_string(l), in + l * c, c, ext, rng, cfg.bias));
        }
        b.fuse = add_conv4d(params_, name + ".fuse", in + cfg.dense_depth * c, c, {1, 1, 1, 1}, rng, cfg.bias);
    }
    head_ = add_conv4d(params_, "fusion", 3 * c, 3, kernel_extents(cfg.conv_mode, 3), rng, cfg.bias);
    // GP feature projections stay fixed so that banked features remain
    // comparable across training.
    for (std::size_t k = 0; k < 3; ++k) {
        branches_[k].project = add_conv4d(params_, "branch" + std::to_string(k + 1) + ".project", c, 3, {1, 1, 1, 1},
                                          rng, false, false);
    }
}

std::vector<std::size_t> Mgpdnet::concat_widths() const {
    std::vector<std::size_t> out;
    for (const Branch& b : branches_) {
        for (const Conv4dLayer& l : b.layers) out.push_back(l.in_channels(params_));
        out.push_back(b.fuse.in_channels(params_));
    }
    out.push_back(head_.in_channels(params_));
    return out;
}

Tensor Mgpdnet::nonlocal(const Tensor& x) const {
    const Shape& s = x.shape();
    const std::size_t c = s[0];
    Tensor pooled = avg_pool2(x);
    const Shape& ps = pooled.shape();
    const std::size_t n = ps.numel() / c;
    Tensor flat = reshape(pooled, Shape{c, n});
    Tensor q = theta_(params_, flat), k = phi_(params_, flat), v = g_(params_, flat);
    const double e = static_cast<double>(q.shape()[0]);
    Tensor attn = softmax_last(scale(matmul(transpose(q, {1, 0}), k), 1.0 / std::sqrt(e)));
    Tensor y = matmul(v, transpose(attn, {1, 0}));
    Tensor z = reshape(out_(params_, y), ps);
    return add(x, upsample_nearest2(z));
}

Tensor Mgpdnet::stem(const Tensor& x) const {
    Tensor f = relu(stem_(params_, x));
    return cfg_.nonlocal ? nonlocal(f) : f;
}

Tensor Mgpdnet::run_branch(const Branch& b, const Tensor& in) const {
    std::vector<Tensor> parts{in};
    for (const Conv4dLayer& l : b.layers) parts.push_back(relu(l(params_, concat(parts, 0))));
    return b.fuse(params_, concat(parts, 0));
}

Detection Mgpdnet::detect(const Tensor& stack) const {
    if (stack.rank() != 5 || stack.shape()[1] != 3) {
        throw ShapeError("mgpdnet expects an [S,3,V,h,w] stack, got " + stack.shape().str());
    }
    const Shape& s = stack.shape();
    const std::size_t S = s[0], V = s[2], h = s[3], w = s[4];
    if (cfg_.nonlocal && (h % 2 || w % 2)) throw ShapeError("mgpdnet needs even patch extents, got " + s.str());

    Detection d;
    BranchFeatures& f = d.features;
    f.f0 = stem(permute(stack, 0, 1));
    f.f1 = run_branch(branches_[0], f.f0);
    f.f2 = run_branch(branches_[1], concat({f.f0, f.f1}, 0));
    f.f3 = run_branch(branches_[2], concat({f.f0, f.f1, f.f2}, 0));
    d.rain = permute(head_(params_, concat({f.f1, f.f2, f.f3}, 0)), 0, 1);

    const Tensor* outs[3] = {&f.f1, &f.f2, &f.f3};
    for (std::size_t k = 0; k < 3; ++k) {
        Tensor p = branches_[k].project(params_, *outs[k]);
        p = slice(slice(p, 1, S / 2, S / 2 + 1), 2, V / 2, V / 2 + 1);
        d.central[k] = reshape(p, Shape{3 * h * w});
    }
    return d;
}

Tensor supervised_loss(const Tensor& rain, const Tensor& rain_gt, const FeatureExtractor& phi, double lambda_p) {
    if (rain.shape() != rain_gt.shape()) {
        throw ShapeError("supervised_loss: " + rain.shape().str() + " vs " + rain_gt.shape().str());
    }
    Tensor l = smooth_l1(sub(rain, rain_gt));
    if (lambda_p != 0.0) l = add(l, scale(perceptual_distance(phi, rain, rain_gt), lambda_p));
    return l;
}

Tensor rain_loss(const Tensor& supervised, const Tensor& unsupervised) { return add(supervised, unsupervised); }

} // namespace lfrain
