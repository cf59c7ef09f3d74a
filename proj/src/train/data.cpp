#include "lfrain/train/data.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/tensor/random.hpp"

#include <algorithm>

namespace lfrain {

namespace fs = std::filesystem;

namespace {

Tensor rain_target(const LightField& streaks, double alpha) {
    Tensor r = scale(lightfield_to_stack(streaks), alpha);
    if (r.shape()[1] == 3) return r;
    return concat({r, r, r}, 1);
}

} // namespace

TrainScene to_train_scene(const SceneData& data) {
    TrainScene s;
    s.name = data.name;
    s.beta = data.params.beta;
    s.rainy = lightfield_to_stack(data.rainy);
    if (!data.clean.empty()) s.clean = lightfield_to_stack(data.clean);
    if (!data.rain.empty()) s.rain = rain_target(data.rain, data.params.alpha);
    if (!data.depth.empty()) s.depth = lightfield_to_stack(data.depth);
    return s;
}

TrainScene to_train_scene(const RainScene& scene, std::string name) {
    TrainScene s;
    s.name = std::move(name);
    s.beta = scene.params.beta;
    s.rainy = lightfield_to_stack(scene.rainy);
    s.clean = lightfield_to_stack(scene.clean);
    s.rain = rain_target(scene.streaks, scene.params.alpha);
    s.depth = lightfield_to_stack(scene.depth);
    return s;
}

std::vector<TrainScene> load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ContractError("dataset directory " + dir.string() + " does not exist");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ContractError("dataset directory " + dir.string() + " holds no scene_* directories");
    std::vector<TrainScene> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(to_train_scene(read_scene(d)));
    return out;
}

Tensor crop_stack(const Tensor& stack, const PatchSpec& p) {
    if (stack.rank() != 5) throw ShapeError("crop_stack: expected [S,C,V,H,W], got " + stack.shape().str());
    if (p.y + p.height > stack.shape()[3] || p.x + p.width > stack.shape()[4] || p.height == 0 || p.width == 0) {
        throw BoundsError("crop_stack: patch exceeds the " + stack.shape().str() + " stack");
    }
    if (p.y == 0 && p.x == 0 && p.height == stack.shape()[3] && p.width == stack.shape()[4]) return stack;
    return slice(slice(stack, 3, p.y, p.y + p.height), 4, p.x, p.x + p.width);
}

PatchSampler::PatchSampler(std::span<const TrainScene> scenes, std::size_t patch, std::uint64_t seed)
    : scenes_(scenes), patch_(patch), seed_(seed) {
    if (scenes_.empty()) throw ContractError("patch sampler needs at least one scene");
    if (patch_ == 0 || patch_ % 2 != 0) throw ContractError("patch size must be even and positive");
    for (const auto& s : scenes_) {
        if (s.height() < patch_ || s.width() < patch_) {
            throw ContractError("scene " + s.name + " is smaller than the " + std::to_string(patch_) + " px patch");
        }
    }
}

Batch PatchSampler::sample(std::uint64_t step) const {
    Batch b;
    b.scene = static_cast<std::size_t>(step % scenes_.size());
    const TrainScene& s = scenes_[b.scene];
    b.beta = s.beta;
    Rng rng(split_seed(seed_, step));
    std::uniform_int_distribution<std::size_t> ys(0, s.height() - patch_), xs(0, s.width() - patch_);
    b.patch.y = ys(rng);
    b.patch.x = xs(rng);
    b.patch.height = b.patch.width = patch_;
    b.input = crop_stack(s.rainy, b.patch);
    if (s.rain.defined()) b.rain = crop_stack(s.rain, b.patch);
    if (s.clean.defined()) b.clean = crop_stack(s.clean, b.patch);
    if (s.depth.defined()) b.depth = crop_stack(s.depth, b.patch);
    return b;
}

} // namespace lfrain
