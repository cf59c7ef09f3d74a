#include "lfrain/nets/rnnat.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/conv.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/train/data.hpp"

#include <cmath>

namespace lfrain {

namespace {

Tensor roll(const Tensor& x, std::size_t axis, std::size_t k) {
    const std::size_t n = x.shape()[axis];
    k %= n;
    if (k == 0) return x;
    return concat({slice(x, axis, k, n), slice(x, axis, 0, k)}, axis);
}

} // namespace

Rnnat::Rnnat(const RnnatConfig& cfg) : cfg_(cfg), params_("rnnat") {
    if (cfg.width == 0 || cfg.stages == 0 || cfg.window == 0) {
        throw ContractError("rnnat width, stage count and window must be positive");
    }
    Rng rng(split_seed(cfg.seed, "rnnat"));
    const std::size_t c = cfg.width;
    const std::size_t e = std::max<std::size_t>(1, c / 2);
    const auto ext = kernel_extents(cfg.conv_mode, 3);
    stem_ = add_conv4d(params_, "stem", 7, c, ext, rng);
    update_ = add_conv4d(params_, "gru.update", 2 * c, c, ext, rng);
    reset_ = add_conv4d(params_, "gru.reset", 2 * c, c, ext, rng);
    candidate_ = add_conv4d(params_, "gru.candidate", 2 * c, c, ext, rng);
    for (std::size_t i = 0; i < cfg.dstb_blocks; ++i) {
        const std::string name = "dstb" + std::to_string(i);
        Dstb b;
        b.q = add_linear(params_, name + ".q", c, e, rng, false);
        b.k = add_linear(params_, name + ".k", c, e, rng, false);
        b.v = add_linear(params_, name + ".v", c, e, rng, false);
        b.out = add_linear(params_, name + ".out", e, c, rng, true);
        b.conv1 = add_conv4d(params_, name + ".conv1", c, c, ext, rng);
        b.conv2 = add_conv4d(params_, name + ".conv2", 2 * c, c, ext, rng);
        b.fuse = add_conv4d(params_, name + ".fuse", 3 * c, c, {1, 1, 1, 1}, rng);
        blocks_.push_back(b);
    }
    // The head starts at zero so an untrained network returns its input.
    head_.weights = params_.add_zeros("head.w", Shape{3, c, ext[0], ext[1], ext[2], ext[3]});
    head_.bias = params_.add_zeros("head.b", Shape{3});
    head_.has_bias = true;
}

Tensor Rnnat::window_attention(std::size_t block, const Tensor& x_in) const {
    const Dstb& b = blocks_.at(block);
    const std::size_t ws = cfg_.window;
    const std::size_t h0 = x_in.shape()[3], w0 = x_in.shape()[4];
    const std::size_t ph = (ws - h0 % ws) % ws, pw = (ws - w0 % ws) % ws;
    Tensor x = x_in;
    if (ph) x = pad(x, 3, 0, ph);
    if (pw) x = pad(x, 4, 0, pw);
    const std::size_t shift = cfg_.shifted_windows ? ws / 2 : 0;
    if (shift) x = roll(roll(x, 3, shift), 4, shift);

    const Shape& s = x.shape();
    const std::size_t c = s[0], S = s[1], V = s[2], h = s[3], w = s[4];
    const std::size_t hb = h / ws, wb = w / ws, n = S * V * h * w, batch = S * V * hb * wb, t = ws * ws;
    Tensor flat = reshape(x, Shape{c, n});
    auto tiles = [&](const Tensor& y) {
        const std::size_t e = y.shape()[0];
        return reshape(y, Shape{e, S, V, hb, ws, wb, ws});
    };
    const Tensor q = b.q(params_, flat), k = b.k(params_, flat), v = b.v(params_, flat);
    const std::size_t e = q.shape()[0];
    Tensor qw = reshape(transpose(tiles(q), {1, 2, 3, 5, 4, 6, 0}), Shape{batch, t, e});
    Tensor kt = reshape(transpose(tiles(k), {1, 2, 3, 5, 0, 4, 6}), Shape{batch, e, t});
    Tensor vw = reshape(transpose(tiles(v), {1, 2, 3, 5, 4, 6, 0}), Shape{batch, t, e});
    Tensor attn = softmax_last(scale(bmm(qw, kt), 1.0 / std::sqrt(static_cast<double>(e))));
    Tensor y = reshape(bmm(attn, vw), Shape{S, V, hb, wb, ws, ws, e});
    y = reshape(transpose(y, {6, 0, 1, 2, 4, 3, 5}), Shape{e, n});
    Tensor out = reshape(b.out(params_, y), s);

    if (shift) out = roll(roll(out, 3, h - shift), 4, w - shift);
    if (ph) out = slice(out, 3, 0, h0);
    if (pw) out = slice(out, 4, 0, w0);
    return out;
}

Tensor Rnnat::dstb(const Dstb& b, std::size_t index, const Tensor& x) const {
    Tensor a = add(x, window_attention(index, x));
    Tensor d1 = relu(b.conv1(params_, a));
    Tensor d2 = relu(b.conv2(params_, concat({a, d1}, 0)));
    return add(x, b.fuse(params_, concat({a, d1, d2}, 0)));
}

Restoration Rnnat::restore(const Tensor& rainy, const Tensor& rain, const Tensor& fog) const {
    if (rainy.rank() != 5 || rainy.shape()[1] != 3) throw ShapeError("rnnat: rainy input must be [S,3,V,h,w]");
    if (rain.shape() != rainy.shape()) {
        throw ShapeError("rnnat: rain " + rain.shape().str() + " does not match input " + rainy.shape().str());
    }
    const Shape& s = rainy.shape();
    if (fog.shape() != Shape{s[0], 1, s[2], s[3], s[4]}) {
        throw ShapeError("rnnat: fog must be [S,1,V,h,w], got " + fog.shape().str());
    }
    Restoration r;
    Tensor estimate = rainy;
    Tensor hidden;
    for (std::size_t stage = 0; stage < cfg_.stages; ++stage) {
        Tensor in = permute(concat({estimate, rain, fog}, 1), 0, 1);
        Tensor feat = relu(stem_(params_, in));
        if (!hidden.defined()) hidden = Tensor::zeros(feat.shape());
        Tensor both = concat({feat, hidden}, 0);
        Tensor z = sigmoid(update_(params_, both));
        Tensor gate = sigmoid(reset_(params_, both));
        Tensor cand = tanh(candidate_(params_, concat({feat, mul(gate, hidden)}, 0)));
        hidden = add(hidden, mul(z, sub(cand, hidden)));
        Tensor y = hidden;
        for (std::size_t i = 0; i < blocks_.size(); ++i) y = dstb(blocks_[i], i, y);
        estimate = add(estimate, permute(head_(params_, y), 0, 1));
        r.stages.push_back(estimate);
    }
    r.restored = clamp(estimate, 0.0, 1.0);
    return r;
}

Discriminator::Discriminator(std::string name, std::size_t views, std::size_t width, std::uint64_t seed)
    : params_(std::move(name)), in_channels_(3 * views) {
    if (views == 0 || width == 0) throw ContractError("discriminator needs views and width");
    Rng rng(split_seed(seed, params_.name()));
    w1_ = params_.add_uniform("conv1.w", Shape{width, in_channels_, 1, 3, 3}, in_channels_ * 9, rng);
    b1_ = params_.add_zeros("conv1.b", Shape{width});
    w2_ = params_.add_uniform("conv2.w", Shape{2 * width, width, 1, 3, 3}, width * 9, rng);
    b2_ = params_.add_zeros("conv2.b", Shape{2 * width});
    fc_ = add_linear(params_, "fc", 2 * width, 1, rng, true);
}

Tensor Discriminator::operator()(const std::vector<Tensor>& stacks) const {
    if (stacks.empty()) throw ContractError("discriminator called on no inputs");
    std::vector<Tensor> images;
    const Shape& s0 = stacks.front().shape();
    for (const Tensor& st : stacks) {
        if (st.shape() != s0 || st.rank() != 5 || s0[0] * s0[1] * s0[2] != in_channels_) {
            throw ShapeError("discriminator expects stacks with " + std::to_string(in_channels_) +
                             " view channels, got " + st.shape().str());
        }
        images.push_back(reshape(st, Shape{1, in_channels_, 1, s0[3], s0[4]}));
    }
    const std::size_t n = images.size();
    Tensor x = images.size() == 1 ? images.front() : concat(images, 0);
    x = subsample2(relu(conv3d(x, params_[w1_], params_[b1_])));
    x = subsample2(relu(conv3d(x, params_[w2_], params_[b2_])));
    const Shape& xs = x.shape();
    Tensor pooled = mean_last(reshape(x, Shape{n, xs[1], xs[3] * xs[4]}));
    Tensor logit = reshape(fc_(params_, transpose(pooled, {1, 0})), Shape{n});
    return sigmoid(clamp(logit, -kLogitClamp, kLogitClamp));
}

std::vector<PatchSpec> sample_disc_patches(std::size_t height, std::size_t width, std::size_t patch, std::size_t count,
                                           std::uint64_t seed) {
    if (patch == 0 || patch > height || patch > width) throw ContractError("discriminator patch does not fit the view");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> ys(0, height - patch), xs(0, width - patch);
    std::vector<PatchSpec> out(count);
    for (auto& p : out) {
        p.y = ys(rng);
        p.x = xs(rng);
        p.height = p.width = patch;
    }
    return out;
}

Tensor pseudo_gt_views(const Tensor& rainy, const Tensor& rain) {
    if (rainy.shape() != rain.shape()) {
        throw ShapeError("pseudo_gt_views: " + rainy.shape().str() + " vs " + rain.shape().str());
    }
    return clamp(sub(rainy, rain), 0.0, 1.0);
}

Tensor generator_loss(const Tensor& restored, const Tensor& truth, const FeatureExtractor& phi, double lambda_pg) {
    if (restored.shape() != truth.shape()) {
        throw ShapeError("generator_loss: " + restored.shape().str() + " vs " + truth.shape().str());
    }
    Tensor l1 = mean(abs(sub(restored, truth)));
    if (lambda_pg == 0.0) return l1;
    return add(l1, scale(perceptual_distance(phi, restored, truth), lambda_pg));
}

namespace {

std::vector<Tensor> crops(const Tensor& stack, const std::vector<PatchSpec>& patches) {
    std::vector<Tensor> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back(crop_stack(stack, p));
    return out;
}

// -log d(real) - log(1 - d(fake)), averaged over the batch entries.
Tensor pair_loss(const Tensor& d_real, const Tensor& d_fake) {
    return add(scale(mean(log(d_real)), -1.0), scale(mean(log(add_scalar(scale(d_fake, -1.0), 1.0))), -1.0));
}

} // namespace

GanLosses gan_losses(const Tensor& fake, const Tensor& real, const Discriminator& dg, const Discriminator& dl,
                     const std::vector<PatchSpec>& patches) {
    if (fake.shape() != real.shape()) throw ShapeError("gan_losses: fake and real stacks differ in shape");
    GanLosses out;
    out.global = pair_loss(dg(real), dg(fake));
    out.local = pair_loss(dl(crops(real, patches)), dl(crops(fake, patches)));
    return out;
}

GanLosses generator_adversarial(const Tensor& fake, const Tensor& real, const Discriminator& dg,
                                const Discriminator& dl, const std::vector<PatchSpec>& patches, bool literal) {
    if (literal) return gan_losses(fake, real.detach(), dg, dl, patches);
    GanLosses out;
    out.global = scale(mean(log(dg(fake))), -1.0);
    out.local = scale(mean(log(dl(crops(fake, patches)))), -1.0);
    return out;
}

Tensor derain_loss(const Tensor& lg, const Tensor& gan_global, const Tensor& gan_local, double lambda_gan) {
    return add(lg, scale(add(gan_global, gan_local), lambda_gan));
}

Tensor total_loss(const Tensor& rain_loss, const Tensor& derain) { return add(rain_loss, derain); }

} // namespace lfrain
