#pragma once

#include "lfrain/gp/gp.hpp"
#include "lfrain/nets/dernet.hpp"
#include "lfrain/nets/mgpdnet.hpp"
#include "lfrain/nets/rnnat.hpp"
#include "lfrain/synth/rain.hpp"
#include "lfrain/train/trainers.hpp"

#include <cstdint>
#include <string>

namespace lfrain {

struct LossWeights {
    double lambda_p = 0.04;
    double lambda_p_real = 0.04;
    double lambda_gp = 0.015;
    double lambda_pg = 0.04;
    double lambda_gan = 0.01;

    bool operator==(const LossWeights&) const = default;
};

/// Everything a command needs besides its input directories. Every field has
/// a default and the whole struct round-trips through `serialize`/`parse`.
struct RunConfig {
    std::uint64_t seed = 1;

    // [synth]
    SynthParams synth;
    std::size_t rows = 5, cols = 5, height = 64, width = 64;

    // [gp]
    GpConfig gp;
    double omega = 0.5;
    MsgpMode msgp = MsgpMode::msgp;

    // [loss]
    LossWeights loss;

    // [net]
    ConvMode conv_mode = ConvMode::d4;
    std::size_t mgpdnet_width = 8;
    std::size_t dense_depth = 3;
    bool nonlocal = true;
    std::size_t dernet_width = 8;
    std::size_t dernet_blocks = 3;
    std::size_t rnnat_width = 8;
    std::size_t dstb_blocks = 2;
    std::size_t window = 4;
    bool shifted_windows = false;
    std::size_t stages = 3;
    std::size_t disc_width = 8;
    bool local_disc = true;

    // [train]
    std::size_t dernet_epochs = 25;
    std::size_t stage1_epochs = 75;
    std::size_t stage2_epochs = 25;
    std::size_t joint_epochs = 75;
    double lr = 2e-4;
    std::size_t decay_every = 80;
    double decay_factor = 0.5;
    std::size_t patch = 16;
    std::size_t disc_patches = 4;
    /// Local discriminator patch side; 0 means patch / 2.
    std::size_t disc_patch = 0;
    bool literal_gan = false;
    std::size_t checkpoint_every = 50;

    // [infer]
    std::size_t tile = 16;
    std::size_t margin = 4;

    // [paths]
    std::string data_dir = "data/train";
    std::string real_dir;
    std::string test_dir = "data/test";
    std::string checkpoint_dir = "runs/ckpt";

    bool operator==(const RunConfig&) const = default;

    /// Throws ContractError on out-of-range values.
    void validate() const;

    MgpdnetConfig mgpdnet_config() const;
    DernetConfig dernet_config() const;
    RnnatConfig rnnat_config() const;
    std::size_t local_patch() const { return disc_patch ? disc_patch : patch / 2; }
};

std::string serialize(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a FormatError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

} // namespace lfrain
