#pragma once

#include "lfrain/lightfield/lightfield.hpp"
#include "lfrain/synth/rain.hpp"
#include "lfrain/tensor/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lfrain {

/// A scene as whole-frame [S, C, V, H, W] stacks. Absent layers stay undefined.
struct TrainScene {
    std::string name;
    Tensor rainy;
    Tensor clean;
    /// alpha * R replicated to 3 channels: the additive streak term of the
    /// rainy image, which is what MGPDNet is trained to predict.
    Tensor rain;
    Tensor depth;
    double beta = 1.8;

    std::size_t rows() const { return rainy.shape()[0]; }
    std::size_t cols() const { return rainy.shape()[2]; }
    std::size_t height() const { return rainy.shape()[3]; }
    std::size_t width() const { return rainy.shape()[4]; }
    bool labelled() const { return clean.defined() && rain.defined() && depth.defined(); }
};

TrainScene to_train_scene(const SceneData& data);
TrainScene to_train_scene(const RainScene& scene, std::string name);

/// Every scene_* subdirectory of `dir` in name order. Throws ContractError when
/// the directory holds no scenes.
std::vector<TrainScene> load_dataset(const std::filesystem::path& dir);

/// Spatial crop of a [S, C, V, H, W] stack.
Tensor crop_stack(const Tensor& stack, const PatchSpec& patch);

struct Batch {
    std::size_t scene = 0;
    PatchSpec patch;
    Tensor input, rain, clean, depth;
    double beta = 1.8;
};

/// Step k uses scene k mod n, so one epoch visits every scene once; the patch
/// origin is drawn from a generator seeded by (seed, k) alone, so any step can
/// be regenerated without replaying earlier ones.
class PatchSampler {
public:
    PatchSampler(std::span<const TrainScene> scenes, std::size_t patch, std::uint64_t seed);
    Batch sample(std::uint64_t step) const;
    std::size_t scene_count() const { return scenes_.size(); }

private:
    std::span<const TrainScene> scenes_;
    std::size_t patch_;
    std::uint64_t seed_;
};

} // namespace lfrain
