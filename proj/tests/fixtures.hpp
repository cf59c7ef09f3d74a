#pragma once

// Small synthetic scenes and configurations shared by the training tests.

#include "lfrain/pipeline/config.hpp"
#include "lfrain/synth/rain.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/train/data.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixture {

inline lfrain::TrainScene scene(std::uint64_t seed, std::size_t rows = 3, std::size_t cols = 3,
                                std::size_t height = 16, std::size_t width = 16, std::size_t streaks = 8) {
    lfrain::SynthParams p;
    p.seed = lfrain::split_seed(seed, 0);
    p.streak_count = streaks;
    const std::uint64_t src = lfrain::split_seed(seed, 1);
    const auto rs = lfrain::synth_scene(p, lfrain::procedural_clean(src, rows, cols, height, width),
                                        lfrain::procedural_depth(src, rows, cols, height, width));
    return lfrain::to_train_scene(rs, "scene_" + std::to_string(seed));
}

inline lfrain::TrainScene unlabelled(lfrain::TrainScene s) {
    s.clean = s.rain = s.depth = lfrain::Tensor{};
    return s;
}

/// A few-second configuration: 3x3 views of 16x16, narrow networks.
inline lfrain::RunConfig tiny_config() {
    lfrain::RunConfig c;
    c.seed = 7;
    c.rows = c.cols = 3;
    c.height = c.width = 16;
    c.synth.streak_count = 6;
    c.gp.n_near = c.gp.n_far = 2;
    c.mgpdnet_width = 4;
    c.dense_depth = 2;
    c.dernet_width = 4;
    c.dernet_blocks = 1;
    c.rnnat_width = 4;
    c.dstb_blocks = 1;
    c.stages = 2;
    c.disc_width = 4;
    c.dernet_epochs = 2;
    c.stage1_epochs = 3;
    c.stage2_epochs = 2;
    c.joint_epochs = 2;
    c.patch = 8;
    c.tile = 8;
    c.checkpoint_every = 4;
    return c;
}

inline void randomize(lfrain::ParameterSet& p, std::uint64_t seed, double amp = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-amp, amp);
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::vector<double> v(p[i].numel());
        for (double& x : v) x = d(rng);
        p.set(i, std::move(v));
    }
}

/// Owning copy of a tensor's values; safe on temporaries.
inline std::vector<double> vals(const lfrain::Tensor& t) { return {t.values().begin(), t.values().end()}; }

inline void zero(lfrain::ParameterSet& p) {
    for (std::size_t i = 0; i < p.size(); ++i) p.set(i, std::vector<double>(p[i].numel(), 0.0));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("lfrain_test_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

} // namespace fixture
