#include "lfrain/nets/mgpdnet.hpp"
#include "lfrain/tensor/ops.hpp"

#include <chrono>
#include <cstdio>
#include <random>

using namespace lfrain;

namespace {

double time_step(const MgpdnetConfig& cfg, std::size_t views, std::size_t patch, int reps) {
    Mgpdnet net(cfg);
    FeatureExtractor phi;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(0, 1);
    std::vector<double> v(views * 3 * views * patch * patch);
    for (double& x : v) x = d(rng);
    Tensor x = Tensor::constant(Shape{views, 3, views, patch, patch}, v);
    Tensor gt = Tensor::constant(Shape{views, 3, views, patch, patch}, v);
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
        Tensor l = supervised_loss(net.detect(x).rain, gt, phi, 0.04);
        (void)backward(l);
    }
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

} // namespace

int main() {
    struct Profile {
        std::size_t width, depth, views, patch;
    } profiles[] = {{4, 2, 5, 8}, {4, 2, 5, 16}, {8, 3, 5, 8}, {8, 3, 5, 16}};
    for (const auto& p : profiles) {
        MgpdnetConfig cfg;
        cfg.width = p.width;
        cfg.dense_depth = p.depth;
        std::printf("mgpdnet c=%zu depth=%zu views=%zux%zu patch=%zu | train step %8.1f ms\n", p.width, p.depth,
                    p.views, p.views, p.patch, time_step(cfg, p.views, p.patch, 2));
    }
}
