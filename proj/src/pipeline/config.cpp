#include "lfrain/pipeline/config.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/util/kv.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace lfrain {

namespace {

template <class F>
void visit_config(F&& f, RunConfig& c) {
    f("seed", c.seed);

    f("synth.rows", c.rows);
    f("synth.cols", c.cols);
    f("synth.height", c.height);
    f("synth.width", c.width);

    f("gp.sigma_eps", c.gp.sigma_eps);
    f("gp.n_near", c.gp.n_near);
    f("gp.n_far", c.gp.n_far);
    f("gp.bank_capacity", c.gp.bank_capacity);
    f("gp.var_floor", c.gp.var_floor);
    f("gp.omega", c.omega);

    f("loss.lambda_p", c.loss.lambda_p);
    f("loss.lambda_p_real", c.loss.lambda_p_real);
    f("loss.lambda_gp", c.loss.lambda_gp);
    f("loss.lambda_pg", c.loss.lambda_pg);
    f("loss.lambda_gan", c.loss.lambda_gan);

    f("net.mgpdnet_width", c.mgpdnet_width);
    f("net.dense_depth", c.dense_depth);
    f("net.nonlocal", c.nonlocal);
    f("net.dernet_width", c.dernet_width);
    f("net.dernet_blocks", c.dernet_blocks);
    f("net.rnnat_width", c.rnnat_width);
    f("net.dstb_blocks", c.dstb_blocks);
    f("net.window", c.window);
    f("net.shifted_windows", c.shifted_windows);
    f("net.stages", c.stages);
    f("net.disc_width", c.disc_width);
    f("net.local_disc", c.local_disc);

    f("train.dernet_epochs", c.dernet_epochs);
    f("train.stage1_epochs", c.stage1_epochs);
    f("train.stage2_epochs", c.stage2_epochs);
    f("train.joint_epochs", c.joint_epochs);
    f("train.lr", c.lr);
    f("train.decay_every", c.decay_every);
    f("train.decay_factor", c.decay_factor);
    f("train.patch", c.patch);
    f("train.disc_patches", c.disc_patches);
    f("train.disc_patch", c.disc_patch);
    f("train.literal_gan", c.literal_gan);
    f("train.checkpoint_every", c.checkpoint_every);

    f("infer.tile", c.tile);
    f("infer.margin", c.margin);

    f("paths.data_dir", c.data_dir);
    f("paths.real_dir", c.real_dir);
    f("paths.test_dir", c.test_dir);
    f("paths.checkpoint_dir", c.checkpoint_dir);
}

} // namespace

void RunConfig::validate() const {
    synth.validate();
    gp.validate();
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ContractError("config: " + what);
    };
    require(rows > 0 && cols > 0 && height > 0 && width > 0, "synth geometry must be positive");
    require(omega >= 0.0 && omega <= 1.0, "gp.omega must lie in [0, 1]");
    for (double l : {loss.lambda_p, loss.lambda_p_real, loss.lambda_gp, loss.lambda_pg, loss.lambda_gan}) {
        require(l >= 0.0, "loss weights must be non-negative");
    }
    require(mgpdnet_width > 0 && dense_depth > 0 && dernet_width > 0 && rnnat_width > 0 && disc_width > 0,
            "network widths must be positive");
    require(stages > 0 && window > 0, "net.stages and net.window must be positive");
    require(lr > 0.0 && decay_factor > 0.0, "train.lr and train.decay_factor must be positive");
    require(patch >= 4 && patch % 2 == 0, "train.patch must be even and at least 4");
    require(local_patch() >= 4 && local_patch() <= patch, "local discriminator patch must lie in [4, patch]");
    require(disc_patches > 0, "train.disc_patches must be positive");
    require(patch <= height && patch <= width, "train.patch exceeds the scene size");
    require((tile + 2 * margin) % 2 == 0, "infer.tile + 2 infer.margin must be even");
}

MgpdnetConfig RunConfig::mgpdnet_config() const {
    MgpdnetConfig m;
    m.width = mgpdnet_width;
    m.dense_depth = dense_depth;
    m.conv_mode = conv_mode;
    m.nonlocal = nonlocal;
    m.seed = split_seed(seed, "mgpdnet");
    return m;
}

DernetConfig RunConfig::dernet_config() const {
    DernetConfig d;
    d.width = dernet_width;
    d.blocks = dernet_blocks;
    d.conv_mode = conv_mode;
    d.seed = split_seed(seed, "dernet");
    return d;
}

RnnatConfig RunConfig::rnnat_config() const {
    RnnatConfig r;
    r.width = rnnat_width;
    r.dstb_blocks = dstb_blocks;
    r.window = window;
    r.shifted_windows = shifted_windows;
    r.stages = stages;
    r.conv_mode = conv_mode;
    r.seed = split_seed(seed, "rnnat");
    return r;
}

std::string serialize(const RunConfig& cfg) {
    KeyValues kv;
    RunConfig c = cfg;
    visit_config([&kv](const char* key, auto& v) { kv.set(key, v); }, c);
    kv.set("net.conv_mode", to_string(c.conv_mode));
    kv.set("gp.msgp", to_string(c.msgp));
    write_synth_params(kv, "synth.", c.synth);
    return kv.serialize();
}

RunConfig parse_run_config(const std::string& text) {
    KeyValues kv = KeyValues::parse(text);
    RunConfig c;
    std::set<std::string> known;
    visit_config(
        [&](const char* key, auto& v) {
            kv.read(key, v);
            known.insert(key);
        },
        c);
    {
        KeyValues probe;
        write_synth_params(probe, "synth.", c.synth);
        for (const auto& k : probe.keys()) known.insert(k);
    }
    read_synth_params(kv, "synth.", c.synth);
    known.insert("net.conv_mode");
    known.insert("gp.msgp");
    if (kv.has("net.conv_mode")) c.conv_mode = parse_conv_mode(kv.str("net.conv_mode"));
    if (kv.has("gp.msgp")) c.msgp = parse_msgp_mode(kv.str("gp.msgp"));
    for (const auto& k : kv.keys()) {
        if (!known.contains(k)) throw FormatError("config: unknown key '" + k + "'");
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read config " + path);
    std::stringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

} // namespace lfrain
