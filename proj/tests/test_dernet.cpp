#include "fixtures.hpp"
#include "oracles.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/nets/dernet.hpp"
#include "lfrain/tensor/gradcheck.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/train/trainers.hpp"

#include <doctest.h>

#include <cmath>

using namespace lfrain;

namespace {

DernetConfig toy() {
    DernetConfig c;
    c.width = 3;
    c.blocks = 1;
    return c;
}

double probe_loss(const Dernet& net, const TrainScene& s) {
    NoGradGuard ng;
    return smooth_l1(sub(estimate_depth(net, s.rainy, s.rain), s.depth)).item();
}

} // namespace

TEST_CASE("fog_from_depth") {
    Tensor d = Tensor::constant(Shape{4}, {0.0, 0.5, 1.0, 2.0});
    const auto a = fixture::vals(fog_from_depth(d, 1.8));
    CHECK(a[0] == 0.0);
    CHECK(a[1] == doctest::Approx(0.59343).epsilon(1e-5));
    CHECK(a[2] == doctest::Approx(0.83470).epsilon(1e-5));
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == fog_value(d.values()[i], 1.8));
    CHECK_THROWS_AS(fog_from_depth(Tensor::constant(Shape{2}, {0.2, -0.1}), 1.8), DomainError);

    std::mt19937_64 rng(4);
    Tensor x = Tensor::leaf(Shape{12}, oracle::random_values(12, rng, 0.1, 2.0));
    CHECK(finite_diff_check([](const Tensor& t) { return sum(fog_from_depth(t, 1.3)); }, x, 12, 1e-6) < 1e-6);
}

TEST_CASE("DERNet shape and zero-weight output") {
    Dernet net(toy());
    std::mt19937_64 rng(1);
    Tensor x = oracle::random_tensor(Shape{3, 3, 2, 6, 4}, rng, 0.0, 1.0);
    Tensor d = net(x);
    CHECK(d.shape() == Shape{3, 1, 2, 6, 4});
    for (double v : d.values()) CHECK(v >= 0.0);

    fixture::zero(net.params());
    for (double v : fixture::vals(net(x))) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    CHECK_THROWS_AS(net(oracle::random_tensor(Shape{3, 1, 2, 6, 4}, rng)), ShapeError);
}

TEST_CASE("DERNet plus smooth_l1 matches central differences") {
    for (ConvMode m : {ConvMode::d4, ConvMode::d2}) {
        DernetConfig c = toy();
        c.conv_mode = m;
        Dernet net(c);
        fixture::randomize(net.params(), 11, 0.4);
        std::mt19937_64 rng(2);
        Tensor rainy = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 1.0);
        Tensor rain = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 0.3);
        Tensor depth = oracle::random_tensor(Shape{2, 1, 2, 4, 4}, rng, 0.0, 2.0);
        auto loss = [&] { return smooth_l1(sub(estimate_depth(net, rainy, rain), depth)); };
        CHECK(finite_diff_check_params(loss, net.params(), 10, 1e-6, 3) < 1e-3);
        // Through the rain input as well.
        auto via_rain = [&](const Tensor& r) { return smooth_l1(sub(estimate_depth(net, rainy, r), depth)); };
        Tensor leaf = Tensor::leaf(rain.shape(), std::vector<double>(rain.values().begin(), rain.values().end()));
        CHECK(finite_diff_check(via_rain, leaf, 10, 1e-6, 5) < 1e-3);
    }
}

TEST_CASE("frozen DERNet rejects updates") {
    Dernet net(toy());
    const auto before = net.params().checksum();
    net.freeze();
    CHECK(net.frozen());
    std::mt19937_64 rng(1);
    Tensor x = oracle::random_tensor(Shape{2, 3, 2, 4, 4}, rng, 0.0, 1.0);
    Tensor loss = mean(net(x));
    Gradients g = backward(loss);
    Adam opt;
    CHECK_THROWS_AS(opt.step(net.params(), g), ContractError);
    CHECK(net.params().checksum() == before);
}

TEST_CASE("DERNet pretraining lowers the depth loss") {
    const TrainScene s = fixture::scene(3);
    std::vector<TrainScene> scenes{s};
    PatchSampler sampler(scenes, 8, 9);
    Dernet net(toy());
    const double before = probe_loss(net, s);
    Adam opt;
    Schedule sched;
    sched.lr = 3e-3;
    std::vector<double> seen;
    train_dernet(net, opt, sampler, {0, 80}, sched, [&](const LossRow& r) {
        CHECK(r.stage == "dernet");
        CHECK_FALSE(r.ls.has_value());
        seen.push_back(*r.ltotal);
    });
    CHECK(seen.size() == 80);
    const double after = probe_loss(net, s);
    MESSAGE("probe smooth_l1 " << before << " -> " << after);
    CHECK(after < 0.9 * before);
}
