// Prints one PASS/FAIL line per acceptance criterion. `--only 3,5` runs a
// subset. The exit status is non-zero if a criterion fails, unless it is listed
// in `--known-failures`; such criteria still print FAIL.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/gp/gp.hpp"
#include "lfrain/lightfield/metrics.hpp"
#include "lfrain/pipeline/commands.hpp"
#include "lfrain/pipeline/pipeline.hpp"
#include "lfrain/tensor/checkpoint.hpp"
#include "lfrain/tensor/conv.hpp"
#include "lfrain/tensor/gradcheck.hpp"
#include "lfrain/tensor/ops.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

using namespace lfrain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---------------------------------------------------------------------------

void conv4d_oracle(Outcome& o) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    auto dim = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    auto odd = [&] { return std::size_t{1} + 2 * dim(0, 2); };
    double worst_composed = 0, worst_fused = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t ci = dim(1, 3), co = dim(1, 3), S = dim(1, 6), V = dim(1, 6), H = dim(1, 6), W = dim(1, 6);
        const std::size_t ks = odd(), kv = odd(), kh = odd(), kw = odd();
        Tensor x = oracle::random_tensor(Shape{ci, S, V, H, W}, rng);
        ConvKernel4d k{oracle::random_tensor(Shape{co, ci, ks, kv, kh, kw}, rng), oracle::random_tensor(Shape{co}, rng)};
        const auto want = oracle::conv4d(fixture::vals(x), fixture::vals(k.weights), fixture::vals(k.bias), long(ci),
                                         long(co), long(S), long(V), long(H), long(W), long(ks), long(kv), long(kh),
                                         long(kw));
        worst_composed = std::max(worst_composed, oracle::max_abs_diff(fixture::vals(conv4d_composed(x, k)), want));
        worst_fused = std::max(worst_fused, oracle::max_abs_diff(fixture::vals(conv4d(x, k)), want));
    }
    const double secs = seconds_since(t0);
    o.detail << "50 instances, max |composed - oracle| " << worst_composed << ", max |fused - oracle| " << worst_fused
             << ", " << secs << " s";
    o.require(worst_composed < 1e-8, "composed deviation");
    o.require(worst_fused < 1e-8, "fused deviation");
    o.require(secs < 10.0, "runtime");
}

// ---------------------------------------------------------------------------

void gradient_integrity(Outcome& o) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    const double h = 1e-5;
    double worst = 0;
    std::string worst_name;
    std::size_t checked = 0;
    auto check = [&](const std::string& name, double err) {
        ++checked;
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
        o.require(err < 1e-3, name);
    };
    auto fd = [&](const std::string& name, const std::function<Tensor(const Tensor&)>& f, const Tensor& at) {
        check(name, finite_diff_check(f, at, 10, h, 7));
    };
    Tensor x = oracle::random_tensor(Shape{2, 3, 4}, rng, 0.2, 1.5);
    Tensor other = oracle::random_tensor(Shape{2, 3, 4}, rng, 0.2, 1.5);
    Tensor mixed = oracle::random_tensor(Shape{2, 3, 4}, rng, -1.0, 1.0);
    auto weighted = [](const Tensor& t) {
        std::vector<double> w(t.numel());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
        return sum(mul(t, Tensor::constant(t.shape(), w)));
    };
    // Keep smooth_l1 arguments away from its |x| = 1 seam.
    Tensor seamless = oracle::random_tensor(Shape{2, 3, 4}, rng, -0.8, 0.8);

    fd("add", [&](const Tensor& t) { return weighted(add(t, other)); }, x);
    fd("sub", [&](const Tensor& t) { return weighted(sub(other, t)); }, x);
    fd("mul", [&](const Tensor& t) { return weighted(mul(t, other)); }, x);
    fd("div", [&](const Tensor& t) { return weighted(div(other, t)); }, x);
    fd("scale", [&](const Tensor& t) { return weighted(scale(t, -2.5)); }, x);
    fd("add_scalar", [&](const Tensor& t) { return weighted(square(add_scalar(t, 0.7))); }, mixed);
    fd("relu", [&](const Tensor& t) { return weighted(relu(t)); }, x);
    fd("clamp", [&](const Tensor& t) { return weighted(clamp(t, 0.0, 1.0)); }, scale(x, 0.5));
    fd("exp", [&](const Tensor& t) { return weighted(exp(t)); }, mixed);
    fd("log", [&](const Tensor& t) { return weighted(log(t)); }, x);
    fd("sigmoid", [&](const Tensor& t) { return weighted(sigmoid(t)); }, mixed);
    fd("tanh", [&](const Tensor& t) { return weighted(tanh(t)); }, mixed);
    fd("softplus", [&](const Tensor& t) { return weighted(softplus(t)); }, mixed);
    fd("abs", [&](const Tensor& t) { return weighted(abs(t)); }, x);
    fd("square", [&](const Tensor& t) { return weighted(square(t)); }, mixed);
    fd("sum", [&](const Tensor& t) { return sum(mul(t, t)); }, mixed);
    fd("mean", [&](const Tensor& t) { return mean(square(t)); }, mixed);
    fd("l2_norm", [&](const Tensor& t) { return l2_norm(t); }, mixed);
    fd("mean_last", [&](const Tensor& t) { return weighted(mean_last(square(t))); }, mixed);
    fd("softmax_last", [&](const Tensor& t) { return weighted(softmax_last(t)); }, mixed);
    fd("reshape", [&](const Tensor& t) { return weighted(square(reshape(t, Shape{6, 4}))); }, mixed);
    fd("transpose", [&](const Tensor& t) { return weighted(reshape(transpose(t, {2, 0, 1}), Shape{2, 3, 4})); },
       mixed);
    fd("permute", [&](const Tensor& t) { return weighted(reshape(permute(t, 0, 2), Shape{2, 3, 4})); }, mixed);
    fd("concat", [&](const Tensor& t) { return weighted(concat({t, other}, 1)); }, mixed);
    fd("slice", [&](const Tensor& t) { return weighted(slice(t, 2, 1, 3)); }, mixed);
    fd("pad", [&](const Tensor& t) { return weighted(pad(t, 2, 1, 2)); }, mixed);
    fd("add_channel_bias", [&](const Tensor& b) { return weighted(add_channel_bias(other, b, 1)); },
       oracle::random_tensor(Shape{3}, rng));
    Tensor rhs2 = oracle::random_tensor(Shape{4, 3}, rng), rhs3 = oracle::random_tensor(Shape{2, 4, 3}, rng);
    fd("matmul", [&](const Tensor& t) { return weighted(matmul(reshape(t, Shape{6, 4}), rhs2)); }, mixed);
    fd("bmm", [&](const Tensor& t) { return weighted(bmm(t, rhs3)); }, mixed);
    Tensor img = oracle::random_tensor(Shape{2, 4, 6}, rng);
    fd("avg_pool2", [&](const Tensor& t) { return weighted(avg_pool2(t)); }, img);
    fd("upsample_nearest2", [&](const Tensor& t) { return weighted(upsample_nearest2(t)); }, img);
    fd("subsample2", [&](const Tensor& t) { return weighted(subsample2(t)); }, img);
    Tensor vol = oracle::random_tensor(Shape{2, 2, 3, 4, 4}, rng);
    Tensor w3 = oracle::random_tensor(Shape{3, 2, 3, 3, 3}, rng), b3 = oracle::random_tensor(Shape{3}, rng);
    fd("conv3d input", [&](const Tensor& t) { return weighted(conv3d(t, w3, b3)); }, vol);
    fd("conv3d weights", [&](const Tensor& t) { return weighted(conv3d(vol, t, b3)); }, w3);
    Tensor x4 = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng);
    Tensor w4 = oracle::random_tensor(Shape{2, 2, 3, 3, 3, 3}, rng), b4 = oracle::random_tensor(Shape{2}, rng);
    fd("conv4d input", [&](const Tensor& t) { return weighted(conv4d(t, {w4, b4})); }, x4);
    fd("conv4d weights", [&](const Tensor& t) { return weighted(conv4d(x4, {t, b4})); }, w4);
    fd("conv4d_composed input", [&](const Tensor& t) { return weighted(conv4d_composed(t, {w4, b4})); }, x4);
    fd("conv4d_composed weights", [&](const Tensor& t) { return weighted(conv4d_composed(x4, {t, b4})); }, w4);
    fd("smooth_l1", [&](const Tensor& t) { return smooth_l1(scale(t, 2.0)); }, seamless);
    fd("fog_from_depth", [&](const Tensor& t) { return weighted(fog_from_depth(t, 1.8)); }, x);
    const auto prev = oracle::random_values(24, rng);
    fd("msgp_guide", [&](const Tensor& t) { return weighted(msgp_guide(prev, reshape(t, Shape{24}), 0.3)); }, mixed);

    // MGPDNet + L_s.
    {
        MgpdnetConfig c;
        c.width = 2;
        c.dense_depth = 2;
        Mgpdnet net(c);
        fixture::randomize(net.params(), 3, 0.5);
        FeatureExtractor phi;
        Tensor in = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 1.0);
        Tensor gt = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 0.3);
        auto loss = [&] { return supervised_loss(net.detect(in).rain, gt, phi, 0.04); };
        check("MGPDNet + L_s", finite_diff_check_params(loss, net.params(), 10, 1e-6, 5));
    }
    // DERNet + smooth_l1.
    {
        Dernet net(DernetConfig{3, 1, ConvMode::d4, 2});
        fixture::randomize(net.params(), 4, 0.4);
        Tensor in = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 1.0);
        Tensor r = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 0.3);
        Tensor d = oracle::random_tensor(Shape{2, 1, 2, 4, 4}, rng, 0.0, 2.0);
        auto loss = [&] { return smooth_l1(sub(estimate_depth(net, in, r), d)); };
        check("DERNet + smooth_l1", finite_diff_check_params(loss, net.params(), 10, 1e-6, 6));
    }
    // One RNNAT stage + L_g.
    {
        Rnnat net(RnnatConfig{4, 1, 2, true, 1, ConvMode::d4, 3});
        fixture::randomize(net.params(), 5, 0.3);
        FeatureExtractor phi;
        Tensor in = oracle::random_tensor(Shape{2, 3, 2, 8, 8}, rng, 0.05, 0.95);
        Tensor r = oracle::random_tensor(Shape{2, 3, 2, 8, 8}, rng, 0.0, 0.4);
        Tensor a = oracle::random_tensor(Shape{2, 1, 2, 8, 8}, rng, 0.0, 0.8);
        Tensor gt = oracle::random_tensor(Shape{2, 3, 2, 8, 8}, rng, 0.0, 1.0);
        auto loss = [&] { return generator_loss(net.restore(in, r, a).stages[0], gt, phi, 0.04); };
        check("RNNAT stage + L_g", finite_diff_check_params(loss, net.params(), 10, 1e-6, 7));
    }
    const double secs = seconds_since(t0);
    o.detail << checked << " checks, worst relative error " << worst << " (" << worst_name << "), " << secs << " s";
    o.require(secs < 60.0, "runtime");
}

// ---------------------------------------------------------------------------

struct DenseGp {
    std::vector<double> mean;
    double var;
};

// k(F, f)^T (K + s2 I)^-1 F and k(f, f) + s2 - k^T (K + s2 I)^-1 k via an
// explicit inverse, with the cosine kernel written out.
DenseGp dense_gp(const std::vector<double>& q, const std::vector<double>& rows, std::size_t n, double s2) {
    const std::size_t d = q.size();
    auto cosine = [&](const double* a, const double* b) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t i = 0; i < d; ++i) {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        return ab / std::sqrt(aa * bb);
    };
    std::vector<double> K(n * n), k(n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = cosine(&rows[i * d], q.data());
        for (std::size_t j = 0; j < n; ++j) K[i * n + j] = cosine(&rows[i * d], &rows[j * d]) + (i == j ? s2 : 0.0);
    }
    const auto inv = oracle::inverse(K, n);
    std::vector<double> alpha(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) alpha[i] += inv[i * n + j] * k[j];
    DenseGp g{std::vector<double>(d, 0.0), 1.0 + s2};
    for (std::size_t i = 0; i < n; ++i) {
        g.var -= k[i] * alpha[i];
        for (std::size_t c = 0; c < d; ++c) g.mean[c] += alpha[i] * rows[i * d + c];
    }
    return g;
}

GpConfig noise_var(double s2) {
    GpConfig c;
    c.sigma_eps = std::sqrt(s2);
    return c;
}

void gp_oracle(Outcome& o) {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<std::size_t> dim(1, 16), cnt(1, 16);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = dim(rng), n = cnt(rng);
        const auto q = oracle::random_values(d, rng), rows = oracle::random_values(n * d, rng);
        const double s2 = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
        const DenseGp ref = dense_gp(q, rows, n, s2);
        const GpConfig cfg = noise_var(s2);
        worst = std::max(worst, oracle::max_abs_diff(gp_mean(q, rows, n, cfg), ref.mean));
        worst = std::max(worst, std::abs(gp_variance(q, rows, n, cfg) - ref.var));

        // The bank-level entry point with both selections.
        FeatureBank bank(d, 64);
        for (std::size_t i = 0; i < n; ++i) bank.append(std::span<const double>(rows).subspan(i * d, d));
        GpConfig sel = cfg;
        sel.n_near = sel.n_far = std::max<std::size_t>(1, n / 2);
        sel.var_floor = 1e-300;
        const BankSelection bs = select_banks(q, bank, sel);
        const GpPosterior post = gp_posterior(q, bank, bs, sel);
        const DenseGp near = dense_gp(q, gather_rows(bank, bs.nearest), bs.nearest.size(), s2);
        const DenseGp far = dense_gp(q, gather_rows(bank, bs.farthest), bs.farthest.size(), s2);
        worst = std::max(worst, oracle::max_abs_diff(post.pseudo_gt, near.mean));
        worst = std::max(worst, std::abs(post.var_near - clamp_variance(near.var, sel)));
        worst = std::max(worst, std::abs(post.var_far - clamp_variance(far.var, sel)));
    }
    const double s = 1.0 / std::sqrt(2.0);
    const std::vector<double> q{s, s}, rows{1, 0, 0, 1};
    const auto m = gp_mean(q, rows, 2, noise_var(0.1));
    const double v = gp_variance(q, rows, 2, noise_var(0.1));
    o.detail << "100 instances, max deviation " << worst << "; worked mean (" << std::setprecision(7) << m[0] << ", "
             << m[1] << "), variance " << v;
    o.require(worst < 1e-8, "dense-inverse agreement");
    // The quoted 0.64281 was formed from 0.7071 / 1.1; the exact value is
    // (1/sqrt 2) / 1.1 = 0.6428243.
    o.require(std::abs(m[0] - s / 1.1) < 1e-12 && std::abs(m[1] - s / 1.1) < 1e-12, "exact worked mean");
    o.require(std::abs(m[0] - 0.64281) < 2e-5 && std::abs(m[1] - 0.64281) < 2e-5, "quoted worked mean");
    o.require(std::round(v * 1e5) / 1e5 == 0.19091, "worked variance to 5 decimals");
}

// ---------------------------------------------------------------------------

void gp_interpolation(Outcome& o) {
    std::mt19937_64 rng(404);
    double worst_interp = 0, worst_rise = -1e300;
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = 12, n = 8;
        const auto rows = oracle::random_values(n * d, rng);
        const std::size_t pick = t % n;
        const std::vector<double> q(rows.begin() + long(pick * d), rows.begin() + long((pick + 1) * d));
        worst_interp = std::max(worst_interp, oracle::max_abs_diff(gp_mean(q, rows, n, noise_var(1e-8)), q));
    }
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = 10, n = 16;
        const auto rows = oracle::random_values(n * d, rng);
        const auto q = oracle::random_values(d, rng);
        double prev = gp_variance(q, std::span<const double>(rows).first(d), 1, GpConfig{});
        for (std::size_t m = 2; m <= n; ++m) {
            const double v = gp_variance(q, std::span<const double>(rows).first(m * d), m, GpConfig{});
            worst_rise = std::max(worst_rise, v - prev);
            prev = v;
        }
    }
    o.detail << "max interpolation error " << worst_interp << ", largest variance change under growth " << worst_rise;
    o.require(worst_interp < 1e-3, "interpolation");
    o.require(worst_rise <= 1e-12, "monotone variance");
}

// ---------------------------------------------------------------------------

std::pair<double, double> centroid(const LightField& lf, std::size_t u, std::size_t v) {
    double m = 0, mx = 0, my = 0;
    for (std::size_t y = 0; y < lf.height(); ++y)
        for (std::size_t x = 0; x < lf.width(); ++x) {
            const double w = lf.at(u, v, 0, y, x);
            m += w;
            mx += w * double(x);
            my += w * double(y);
        }
    return {mx / m, my / m};
}

void synthesis_identities(Outcome& o) {
    const double a = fog_value(1.0, 1.8);
    o.require(std::round(a * 1e5) / 1e5 == 0.83470, "fog value");

    SynthParams p;
    p.seed = 5;
    const auto rs =
        synth_scene(p, procedural_clean(9, 5, 5, 32, 32), procedural_depth(9, 5, 5, 32, 32));
    double worst = 0;
    std::size_t off_clamp = 0;
    for (std::size_t u = 0; u < 5; ++u)
        for (std::size_t v = 0; v < 5; ++v)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < 32; ++y)
                    for (std::size_t x = 0; x < 32; ++x) {
                        const double B = rs.clean.at(u, v, c, y, x), R = rs.streaks.at(u, v, 0, y, x);
                        const double A = rs.fog.at(u, v, 0, y, x);
                        const double raw = B + p.alpha * R + (1 - p.alpha) * p.a0 * A;
                        if (raw <= 0.0 || raw >= 1.0) continue;
                        ++off_clamp;
                        const double I = rs.rainy.at(u, v, c, y, x);
                        worst = std::max(worst, std::abs(I - p.alpha * R - (1 - p.alpha) * p.a0 * A - B));
                    }
    o.require(off_clamp > 0 && worst < 1e-12, "residual inversion");

    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> disp(p.disparity_min, p.disparity_max), ang(p.angle_min, p.angle_max);
    double worst_shift = 0;
    for (int t = 0; t < 20; ++t) {
        const double d = disp(rng);
        const Streak s{32.0, 32.0, 14.0, 1.2, ang(rng), 0.7, d};
        const LightField r = rasterize_streaks({s}, 5, 5, 64, 64);
        const auto [x0, y0] = centroid(r, 2, 2);
        for (std::size_t u = 0; u < 5; ++u)
            for (std::size_t v = 0; v < 5; ++v) {
                const auto [x1, y1] = centroid(r, u, v);
                worst_shift = std::max(worst_shift, std::abs((x1 - x0) - d * (double(v) - 2.0)));
                worst_shift = std::max(worst_shift, std::abs((y1 - y0) - d * (double(u) - 2.0)));
            }
    }
    o.require(worst_shift < 0.5, "streak displacement");
    o.detail << "A(beta=1.8, D=1) = " << std::setprecision(7) << a << "; max |I - aR - (1-a)A0 A - B| off-clamp "
             << worst << " over " << off_clamp << " samples; max streak displacement error " << worst_shift << " px";
}

// ---------------------------------------------------------------------------
// Desk profile shared by the learning-signal and ablation criteria.

RunConfig desk_config() {
    RunConfig c;
    c.seed = 11;
    c.rows = c.cols = 5;
    c.height = c.width = 64;
    c.mgpdnet_width = 4;
    c.dense_depth = 2;
    c.dernet_width = 4;
    c.rnnat_width = 4;
    c.patch = 8;
    c.lr = 1e-3;
    c.tile = 8;
    c.margin = 4;
    c.dernet_epochs = 25;
    c.stage1_epochs = 75;
    c.joint_epochs = 75;
    return c;
}

struct DeskData {
    std::vector<TrainScene> train;
    TrainScene held;
};

const DeskData& desk_data() {
    static const DeskData data = [] {
        DeskData d;
        for (std::uint64_t i = 0; i < 5; ++i) {
            TrainScene s = fixture::scene(100 + i, 5, 5, 64, 64, 40);
            if (i < 4) d.train.push_back(std::move(s));
            else d.held = std::move(s);
        }
        return d;
    }();
    return data;
}

double center_psnr(const Tensor& a, const Tensor& b) {
    return psnr(stack_to_lightfield(a).center_view(), stack_to_lightfield(b).center_view());
}

double mean_view_psnr(const Tensor& a, const Tensor& b) {
    const auto rows = evaluate_views("held", stack_to_lightfield(a), stack_to_lightfield(b));
    double s = 0;
    for (const auto& r : rows) s += r.psnr_db;
    return s / double(rows.size());
}

// Mean L_s over fixed patches, so start and end are measured on the same data.
double probe_ls(const Mgpdnet& net, const std::vector<Batch>& probe, double lambda_p) {
    static const FeatureExtractor phi;
    NoGradGuard ng;
    double s = 0;
    for (const Batch& b : probe) s += supervised_loss(net.detect(b.input).rain, b.rain, phi, lambda_p).item();
    return s / double(probe.size());
}

struct DeskRun {
    double ls_before = 0, ls_after = 0, stage1_secs = 0;
    double psnr_rainy = 0, psnr_restored = 0;
    double mean_psnr = 0;
    std::uint64_t dernet_sum_before = 0, dernet_sum_after = 0;
    double secs = 0;
};

DeskRun train_desk(ConvMode mode) {
    const auto t0 = Clock::now();
    RunConfig cfg = desk_config();
    cfg.conv_mode = mode;
    const DeskData& data = desk_data();
    Pipeline p(cfg, data.train, {});
    PatchSampler probe_sampler(data.train, cfg.patch, 999);
    std::vector<Batch> probe;
    for (std::uint64_t k = 0; k < 16; ++k) probe.push_back(probe_sampler.sample(k));

    DeskRun r;
    const StagePlan s1 = p.stage("stage1");
    p.run(0, s1.begin, {});
    r.ls_before = probe_ls(p.mgpdnet(), probe, cfg.loss.lambda_p);
    const auto t1 = Clock::now();
    p.run(s1.begin, s1.end, {});
    r.stage1_secs = seconds_since(t1);
    r.ls_after = probe_ls(p.mgpdnet(), probe, cfg.loss.lambda_p);
    r.dernet_sum_before = p.dernet().params().checksum();
    p.run(s1.end, p.total_steps(), {});
    r.dernet_sum_after = p.dernet().params().checksum();

    const Derained d = derain_stack(cfg, p.mgpdnet(), p.dernet(), p.rnnat(), data.held.rainy, data.held.beta);
    r.psnr_rainy = center_psnr(data.held.rainy, data.held.clean);
    r.psnr_restored = center_psnr(d.restored, data.held.clean);
    r.mean_psnr = mean_view_psnr(d.restored, data.held.clean);
    r.secs = seconds_since(t0);
    return r;
}

const DeskRun& desk_4d() {
    static const DeskRun r = train_desk(ConvMode::d4);
    return r;
}

void learning_signal(Outcome& o) {
    const DeskRun& r = desk_4d();
    o.detail << "probe L_s " << r.ls_before << " -> " << r.ls_after << " (ratio " << r.ls_after / r.ls_before
             << ") in 300 steps, " << r.stage1_secs << " s; held-out centre PSNR rainy " << r.psnr_rainy
             << " dB, restored " << r.psnr_restored << " dB";
    o.require(r.ls_after < 0.9 * r.ls_before, "stage-1 loss ratio");
    o.require(r.stage1_secs < 600.0, "stage-1 runtime");
    o.require(r.psnr_restored > r.psnr_rainy, "joint restoration PSNR");
}

// ---------------------------------------------------------------------------

struct MsgpToy {
    std::vector<TrainScene> synthetic, real;
};

// Unlabelled "real" scenes come from the synthetic distribution, or with
// `shifted` from a different streak population.
MsgpToy msgp_toy(std::uint64_t seed, bool shifted) {
    MsgpToy t;
    for (std::uint64_t i = 0; i < 2; ++i) t.synthetic.push_back(fixture::scene(split_seed(seed, i), 3, 3, 16, 16, 10));
    for (std::uint64_t i = 0; i < 2; ++i) {
        SynthParams p;
        p.seed = split_seed(seed, 10 + i);
        p.streak_count = 16;
        if (shifted) {
            p.angle_min = 1.1;
            p.angle_max = 1.4;
            p.alpha = 0.7;
        }
        const std::uint64_t src = split_seed(seed, 20 + i);
        const auto rs = synth_scene(p, procedural_clean(src, 3, 3, 16, 16), procedural_depth(src, 3, 3, 16, 16));
        t.real.push_back(fixture::unlabelled(to_train_scene(rs, "real")));
    }
    return t;
}

// Mean L_r on fixed real patches after stage 1 and 200 stage-2 steps.
double stage2_final(const MsgpToy& toy, MsgpMode mode, std::uint64_t seed) {
    MgpdnetConfig mc;
    mc.width = 4;
    mc.dense_depth = 2;
    mc.seed = seed;
    Mgpdnet net(mc);
    FeatureExtractor phi;
    FeatureBanks banks = make_banks(8, 128);
    Adam o1, o2;
    Schedule sched;
    sched.lr = 1e-3;
    train_stage1(net, phi, o1, banks, PatchSampler(toy.synthetic, 8, seed), {0, 40}, sched, 0.04, {});
    Stage2Options opts;
    opts.mode = mode;
    opts.gp.n_near = opts.gp.n_far = 8;
    train_stage2(net, phi, o2, banks, PatchSampler(toy.real, 8, seed + 1), {0, 200}, sched, opts, {});
    PatchSampler probe(toy.real, 8, seed + 2);
    NoGradGuard ng;
    double s = 0;
    for (std::uint64_t k = 0; k < 8; ++k) {
        const Detection det = net.detect(probe.sample(k).input);
        s += unsupervised_loss(det, phi, banks, 8, opts).item();
    }
    return s / 8.0;
}

void msgp_guidance(Outcome& o) {
    int wins = 0, shifted_wins = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const MsgpToy toy = msgp_toy(seed, false);
        const double guided = stage2_final(toy, MsgpMode::msgp, seed);
        const double plain = stage2_final(toy, MsgpMode::mgp, seed);
        wins += guided <= plain;
        o.detail << "seed " << seed << ": guided " << guided << " vs unguided " << plain << "; ";
        const MsgpToy shifted = msgp_toy(seed, true);
        shifted_wins += stage2_final(shifted, MsgpMode::msgp, seed) <= stage2_final(shifted, MsgpMode::mgp, seed);
    }
    o.detail << wins << "/3 seeds favour guidance (shifted-domain toy, not gated: " << shifted_wins << "/3)";
    o.require(wins >= 2, "guided wins");
}

// ---------------------------------------------------------------------------

void ablation_direction(Outcome& o) {
    const DeskRun& d4 = desk_4d();
    const DeskRun d2 = train_desk(ConvMode::d2);
    o.detail << "held-out mean-view PSNR 4d " << d4.mean_psnr << " dB, 2d " << d2.mean_psnr << " dB";
    o.require(d4.mean_psnr >= d2.mean_psnr, "4d >= 2d");
}

// ---------------------------------------------------------------------------

void loss_points(Outcome& o) {
    const double s = smooth_l1(Tensor::scalar(0.5)).item();
    o.require(std::abs(s - 0.125) < 1e-12, "smooth_l1(0.5)");

    Discriminator dg("disc_global", 4, 3, 1), dl("disc_local", 4, 3, 2);
    fixture::zero(dg.params());
    fixture::zero(dl.params());
    std::mt19937_64 rng(9);
    Tensor fake = oracle::random_tensor(Shape{2, 3, 2, 8, 8}, rng, 0.0, 1.0);
    Tensor real = oracle::random_tensor(Shape{2, 3, 2, 8, 8}, rng, 0.0, 1.0);
    const GanLosses g = gan_losses(fake, real, dg, dl, sample_disc_patches(8, 8, 4, 3, 1));
    o.require(std::abs(g.global.item() - 2 * std::log(2.0)) < 1e-12, "global GAN at D = 0.5");
    o.require(std::abs(g.local.item() - 2 * std::log(2.0)) < 1e-12, "local GAN at D = 0.5");

    const double lg = 0.37, gg = 1.3, gl = 0.9;
    const double ld = derain_loss(Tensor::scalar(lg), Tensor::scalar(gg), Tensor::scalar(gl), 0.01).item();
    o.require(std::abs(ld - (lg + 0.01 * (gg + gl))) < 1e-12, "L_derain");
    o.detail << "smooth_l1(0.5) = " << s << ", GAN(D=0.5) = " << std::setprecision(15) << g.global.item() << " / "
             << g.local.item() << " (2 log 2 = " << 2 * std::log(2.0) << "), L_derain = " << ld;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
    std::vector<fs::path> la, lb;
    for (const auto& e : fs::recursive_directory_iterator(a)) la.push_back(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b)) lb.push_back(fs::relative(e.path(), b));
    std::sort(la.begin(), la.end());
    std::sort(lb.begin(), lb.end());
    if (la != lb) return false;
    for (const auto& rel : la) {
        if (!fs::is_regular_file(a / rel)) continue;
        ++files;
        if (slurp(a / rel) != slurp(b / rel)) return false;
    }
    return true;
}

void determinism(Outcome& o) {
    const fs::path root = fixture::temp_dir("acceptance");
    auto full_run = [&](const std::string& tag) {
        const fs::path dir = root / tag;
        RunConfig cfg = fixture::tiny_config();
        cfg.data_dir = (dir / "train").string();
        cfg.real_dir = (dir / "real").string();
        cfg.checkpoint_dir = (dir / "ckpt").string();
        cmd_synth(cfg, 2, cfg.data_dir);
        cmd_synth(cfg, 1, cfg.real_dir, true, 10);
        cmd_synth(cfg, 1, dir / "test", false, 20);
        std::ostringstream msg;
        cmd_train(cfg, {}, msg);
        cmd_derain(cfg, dir / "ckpt/state.bin", dir / "test/scene_020", dir / "derained");
        std::ofstream csv(dir / "metrics.csv");
        cmd_eval({{dir / "derained/restored", dir / "test/scene_020/gt"}}, csv);
    };
    full_run("a");
    full_run("b");
    std::size_t files = 0;
    o.require(same_tree(root / "a", root / "b", files), "rerun bitwise identical");

    const NamedTensors t = load_tensors(root / "a/ckpt/state.bin");
    save_tensors(root / "copy.bin", t);
    const NamedTensors back = load_tensors(root / "copy.bin");
    bool same = back.size() == t.size();
    for (std::size_t i = 0; same && i < t.size(); ++i)
        same = t[i].first == back[i].first && t[i].second.shape() == back[i].second.shape() &&
               fixture::vals(t[i].second) == fixture::vals(back[i].second);
    o.require(same && slurp(root / "copy.bin") == slurp(root / "a/ckpt/state.bin"), "checkpoint round trip");

    const auto banks = load_banks(root / "a/ckpt/state.banks.bin", 256);
    save_banks(root / "copy.banks.bin", banks);
    const auto banks2 = load_banks(root / "copy.banks.bin", 256);
    bool banks_same = banks.size() == banks2.size() && !banks.empty() && banks[0].size() > 0;
    for (std::size_t i = 0; banks_same && i < banks.size(); ++i) banks_same = banks[i] == banks2[i];
    o.require(banks_same && slurp(root / "copy.banks.bin") == slurp(root / "a/ckpt/state.banks.bin"),
              "feature bank round trip");

    // DERNet after its stage vs after joint training, from the stage snapshots.
    const NamedTensors after_dernet = load_tensors(root / "a/ckpt/dernet.bin");
    Dernet d1(fixture::tiny_config().dernet_config()), d2(fixture::tiny_config().dernet_config());
    d1.params().import_tensors(after_dernet);
    d2.params().import_tensors(t);
    o.require(d1.params().checksum() == d2.params().checksum(), "tiny-run DERNet checksum");
    const DeskRun& desk = desk_4d();
    o.require(desk.dernet_sum_before == desk.dernet_sum_after, "desk-run DERNet checksum");
    o.detail << files << " files identical across reruns; checkpoint (" << t.size()
             << " tensors) and banks round-trip; DERNet checksum " << std::hex << d1.params().checksum()
             << " unchanged through joint training";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    std::vector<int> known;
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--known-failures", known, "criteria whose failure does not fail the run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const std::set<int> pick(only.begin(), only.end()), expected(known.begin(), known.end());

    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"4D convolution oracle equivalence", conv4d_oracle},
        {"gradient integrity", gradient_integrity},
        {"GP oracle equivalence", gp_oracle},
        {"GP interpolation and monotonicity", gp_interpolation},
        {"synthesis identities", synthesis_identities},
        {"desk-scale learning signal", learning_signal},
        {"MSGP guidance", msgp_guidance},
        {"ablation direction 4d >= 2d", ablation_direction},
        {"loss formula point checks", loss_points},
        {"determinism and persistence", determinism},
    };
    int failures = 0, known_failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = int(i) + 1;
        if (!pick.empty() && !pick.count(n)) continue;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "]";
        }
        if (!o.pass) ++(expected.count(n) ? known_failures : failures);
        if (o.pass && expected.count(n)) o.detail << " (listed as a known failure but passed)";
        std::printf("%s criterion %d: %s | %s | %.1f s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(),
                    o.detail.str().c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    if (known_failures) std::printf("%d known failure(s) not counted against the exit status\n", known_failures);
    return failures == 0 ? 0 : 1;
}
