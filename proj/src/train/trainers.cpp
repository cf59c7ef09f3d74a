#include "lfrain/train/trainers.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/util/kv.hpp"

#include <algorithm>

namespace lfrain {

MsgpMode parse_msgp_mode(const std::string& s) {
    if (s == "off") return MsgpMode::off;
    if (s == "mgp") return MsgpMode::mgp;
    if (s == "msgp") return MsgpMode::msgp;
    throw FormatError("msgp must be off, mgp or msgp, got '" + s + "'");
}

std::string to_string(MsgpMode m) {
    switch (m) {
    case MsgpMode::off: return "off";
    case MsgpMode::mgp: return "mgp";
    case MsgpMode::msgp: return "msgp";
    }
    return "?";
}

void write_loss_header(std::ostream& os) { os << "step,stage,L_s,L_r,L_g,L_gan,L_total\n"; }

void write_loss_row(std::ostream& os, const LossRow& r) {
    auto cell = [&os](const std::optional<double>& v) {
        os << ',';
        if (v) os << format_double(*v);
    };
    os << r.step << ',' << r.stage;
    cell(r.ls);
    cell(r.lr);
    cell(r.lg);
    cell(r.lgan);
    cell(r.ltotal);
    os << '\n';
}

double scheduled_lr(const Schedule& s, std::uint64_t step, std::size_t scenes) {
    const std::size_t epoch = static_cast<std::size_t>(step / std::max<std::size_t>(1, scenes));
    return step_decay_lr(s.lr, epoch, s.decay_every, s.decay_factor);
}

FeatureBanks make_banks(std::size_t patch, std::size_t capacity) {
    const std::size_t dim = 3 * patch * patch;
    return {FeatureBank(dim, capacity), FeatureBank(dim, capacity), FeatureBank(dim, capacity)};
}

namespace {

void check_range(StepRange r) {
    if (r.end < r.begin) throw ContractError("step range ends before it begins");
}

void emit(const LossSink& sink, const LossRow& row) {
    if (sink) sink(row);
}

} // namespace

void train_dernet(Dernet& net, Adam& opt, const PatchSampler& data, StepRange range, const Schedule& sched,
                  const LossSink& sink) {
    check_range(range);
    for (std::uint64_t step = range.begin; step < range.end; ++step) {
        const Batch b = data.sample(step);
        if (!b.rain.defined() || !b.depth.defined()) throw ContractError("dernet training needs rain and depth layers");
        opt.set_lr(scheduled_lr(sched, step, data.scene_count()));
        Tensor loss = smooth_l1(sub(estimate_depth(net, b.input, b.rain), b.depth));
        opt.step(net.params(), backward(loss));
        emit(sink, LossRow{step, "dernet", {}, {}, {}, {}, loss.item()});
    }
}

void train_stage1(Mgpdnet& net, const FeatureExtractor& phi, Adam& opt, FeatureBanks& banks,
                  const PatchSampler& data, StepRange range, const Schedule& sched, double lambda_p,
                  const LossSink& sink) {
    check_range(range);
    for (std::uint64_t step = range.begin; step < range.end; ++step) {
        const Batch b = data.sample(step);
        if (!b.rain.defined()) throw ContractError("stage-1 training needs ground-truth rain layers");
        opt.set_lr(scheduled_lr(sched, step, data.scene_count()));
        Detection det = net.detect(b.input);
        for (std::size_t k = 0; k < 3; ++k) banks[k].append(det.central[k].values());
        Tensor loss = supervised_loss(det.rain, b.rain, phi, lambda_p);
        opt.step(net.params(), backward(loss));
        emit(sink, LossRow{step, "stage1", loss.item(), {}, {}, {}, loss.item()});
    }
}

Tensor unsupervised_loss(const Detection& det, const FeatureExtractor& phi, const FeatureBanks& banks,
                         std::size_t patch, const Stage2Options& opts) {
    if (opts.mode == MsgpMode::off) throw ContractError("unsupervised loss requested with msgp = off");
    const FeatureMap map = [&phi, patch](const Tensor& flat) { return phi.vector_features(flat, patch, patch); };
    std::vector<Tensor> losses;
    std::vector<double> previous;
    for (std::size_t k = 0; k < 3; ++k) {
        if (banks[k].empty()) throw ContractError("stage-2 training needs a populated feature bank");
        Tensor query = det.central[k];
        if (k > 0 && opts.mode == MsgpMode::msgp) query = msgp_guide(previous, query, opts.omega);
        auto q = query.values();
        const BankSelection sel = select_banks(q, banks[k], opts.gp);
        GpPosterior post = gp_posterior(q, banks[k], sel, opts.gp);
        losses.push_back(gp_loss(query, post, map, opts.weights));
        previous = std::move(post.pseudo_gt);
    }
    return unsup_loss_aggregate(losses);
}

void train_stage2(Mgpdnet& net, const FeatureExtractor& phi, Adam& opt, const FeatureBanks& banks,
                  const PatchSampler& real, StepRange range, const Schedule& sched, const Stage2Options& opts,
                  const LossSink& sink) {
    check_range(range);
    for (std::uint64_t step = range.begin; step < range.end; ++step) {
        const Batch b = real.sample(step);
        opt.set_lr(scheduled_lr(sched, step, real.scene_count()));
        Detection det = net.detect(b.input);
        Tensor loss = unsupervised_loss(det, phi, banks, b.patch.height, opts);
        opt.step(net.params(), backward(loss));
        emit(sink, LossRow{step, "stage2", {}, loss.item(), {}, {}, loss.item()});
    }
}

void train_joint(JointModels m, const FeatureExtractor& phi, Adam& gen_opt, Adam& disc_opt,
                 const PatchSampler& data, const PatchSampler* real, const FeatureBanks* banks, StepRange range,
                 const Schedule& sched, const JointOptions& opts, const LossSink& sink) {
    check_range(range);
    if (!m.dernet.frozen()) throw ContractError("joint training requires a frozen DERNet");
    const bool use_real = real != nullptr && opts.stage2.mode != MsgpMode::off;
    if (use_real && banks == nullptr) throw ContractError("joint training with real data needs the feature banks");
    const std::uint64_t dernet_sum = m.dernet.params().checksum();
    ParameterSet* generators[] = {&m.mgpdnet.params(), &m.rnnat.params()};
    ParameterSet* discriminators[] = {&m.global.params(), &m.local.params()};

    for (std::uint64_t step = range.begin; step < range.end; ++step) {
        const Batch b = data.sample(step);
        if (!b.rain.defined() || !b.clean.defined()) throw ContractError("joint training needs labelled scenes");
        const double lr = scheduled_lr(sched, step, data.scene_count());
        gen_opt.set_lr(lr);
        disc_opt.set_lr(lr);

        Detection det = m.mgpdnet.detect(b.input);
        Tensor ls = supervised_loss(det.rain, b.rain, phi, opts.lambda_p);
        Tensor lr_term;
        if (use_real) {
            const Batch rb = real->sample(step);
            lr_term = unsupervised_loss(m.mgpdnet.detect(rb.input), phi, *banks, rb.patch.height, opts.stage2);
        }
        Tensor fog;
        {
            NoGradGuard frozen;
            fog = fog_from_depth(estimate_depth(m.dernet, b.input, det.rain.detach()), b.beta);
        }
        Tensor restored = m.rnnat.restore(b.input, det.rain, fog).restored;
        const auto patches = sample_disc_patches(b.patch.height, b.patch.width, opts.disc_patch, opts.disc_patches,
                                                 split_seed(opts.seed, step));

        GanLosses d = gan_losses(restored.detach(), b.clean, m.global, m.local, patches);
        if (!opts.local_disc) d.local = Tensor::scalar(0.0);
        Tensor ld = add(d.global, d.local);
        disc_opt.step(discriminators, backward(ld));

        Tensor lg = generator_loss(restored, b.clean, phi, opts.lambda_pg);
        GanLosses adv = generator_adversarial(restored, b.clean, m.global, m.local, patches, opts.literal_gan);
        if (!opts.local_disc) adv.local = Tensor::scalar(0.0);
        Tensor lrain = use_real ? rain_loss(ls, lr_term) : ls;
        Tensor ltotal = total_loss(lrain, derain_loss(lg, adv.global, adv.local, opts.lambda_gan));
        gen_opt.step(generators, backward(ltotal));

        LossRow row{step, "joint", ls.item(), {}, lg.item(), ld.item(), ltotal.item()};
        if (use_real) row.lr = lr_term.item();
        emit(sink, row);
    }
    if (m.dernet.params().checksum() != dernet_sum) throw ContractError("DERNet parameters changed during joint training");
}

namespace {

Derained run_window(const Mgpdnet& mgpdnet, const Dernet& dernet, const Rnnat& rnnat, const Tensor& x, double beta) {
    Derained d;
    d.rain = mgpdnet.detect(x).rain;
    d.depth = estimate_depth(dernet, x, d.rain);
    d.fog = fog_from_depth(d.depth, beta);
    d.restored = rnnat.restore(x, d.rain, d.fog).restored;
    return d;
}

// Copies rows [oy, oy + th) x [ox, ox + tw) of `part` (offset by its window
// origin wy, wx) into the full-frame buffer.
void paste(std::vector<double>& full, const Shape& fs, const Tensor& part, std::size_t wy, std::size_t wx,
           std::size_t oy, std::size_t ox, std::size_t th, std::size_t tw) {
    const Shape& ps = part.shape();
    auto pv = part.values();
    const std::size_t lead = fs[0] * fs[1] * fs[2];
    for (std::size_t i = 0; i < lead; ++i)
        for (std::size_t y = oy; y < oy + th; ++y) {
            const double* src = pv.data() + (i * ps[3] + (y - wy)) * ps[4] + (ox - wx);
            std::copy(src, src + tw, full.data() + (i * fs[3] + y) * fs[4] + ox);
        }
}

std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t tile) {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o < extent; o += tile) out.push_back(o);
    return out;
}

} // namespace

Derained run_pipeline(const Mgpdnet& mgpdnet, const Dernet& dernet, const Rnnat& rnnat, const Tensor& rainy,
                      double beta, std::size_t tile, std::size_t margin) {
    if (rainy.rank() != 5 || rainy.shape()[1] != 3) throw ShapeError("pipeline input must be [S,3,V,H,W]");
    NoGradGuard inference;
    const Shape& s = rainy.shape();
    const std::size_t H = s[3], W = s[4];
    const std::size_t win = tile + 2 * margin;
    if (tile == 0 || (H <= win && W <= win)) return run_window(mgpdnet, dernet, rnnat, rainy, beta);
    if (win % 2 != 0) throw ContractError("pipeline window tile + 2 margin must be even");
    if (H < win || W < win) throw ContractError("frame is smaller than one pipeline window");

    const Shape s3{s[0], 3, s[2], H, W}, s1{s[0], 1, s[2], H, W};
    std::vector<double> rain(s3.numel()), restored(s3.numel()), depth(s1.numel()), fog(s1.numel());
    for (std::size_t oy : tile_origins(H, tile))
        for (std::size_t ox : tile_origins(W, tile)) {
            const std::size_t th = std::min(tile, H - oy), tw = std::min(tile, W - ox);
            const std::size_t wy = std::min(oy > margin ? oy - margin : 0, H - win);
            const std::size_t wx = std::min(ox > margin ? ox - margin : 0, W - win);
            Derained d = run_window(mgpdnet, dernet, rnnat, crop_stack(rainy, PatchSpec{wy, wx, win, win}), beta);
            paste(rain, s3, d.rain, wy, wx, oy, ox, th, tw);
            paste(restored, s3, d.restored, wy, wx, oy, ox, th, tw);
            paste(depth, s1, d.depth, wy, wx, oy, ox, th, tw);
            paste(fog, s1, d.fog, wy, wx, oy, ox, th, tw);
        }
    return Derained{Tensor::constant(s3, std::move(rain)), Tensor::constant(s1, std::move(depth)),
                    Tensor::constant(s1, std::move(fog)), Tensor::constant(s3, std::move(restored))};
}

} // namespace lfrain
