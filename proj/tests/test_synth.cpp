#include "oracles.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/synth/rain.hpp"
#include "lfrain/util/kv.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

using namespace lfrain;
namespace fs = std::filesystem;

namespace {

// Intensity-weighted centroid of one view of a single-channel layer.
std::pair<double, double> centroid(const LightField& lf, std::size_t u, std::size_t v) {
    double m = 0, mx = 0, my = 0;
    for (std::size_t y = 0; y < lf.height(); ++y)
        for (std::size_t x = 0; x < lf.width(); ++x) {
            const double w = lf.at(u, v, 0, y, x);
            m += w;
            mx += w * static_cast<double>(x);
            my += w * static_cast<double>(y);
        }
    return {mx / m, my / m};
}

std::size_t hash_values(const std::vector<double>& v) {
    std::size_t h = 0;
    for (double x : v) h = h * 1000003u ^ std::hash<double>{}(x);
    return h;
}

} // namespace

TEST_CASE("rasterize_streaks") {
    SynthParams p;
    SUBCASE("empty population") {
        p.streak_count = 0;
        LightField r = rasterize_streaks(p, 3, 3, 16, 16);
        for (double x : r.data()) CHECK(x == 0.0);
    }
    SUBCASE("vertical streak moves by the disparity between neighbouring views") {
        for (double d : {1.0, 1.5, 2.0, 0.7}) {
            Streak s{20.0, 20.0, 10.0, 1.2, std::numbers::pi / 2, 0.7, d};
            LightField r = rasterize_streaks({s}, 5, 5, 40, 40);
            auto [x0, y0] = centroid(r, 2, 2);
            auto [x1, y1] = centroid(r, 2, 3);
            CHECK(std::abs((x1 - x0) - d) < 0.5);
            CHECK(std::abs(y1 - y0) < 1e-9);
            auto [x2, y2] = centroid(r, 4, 2);
            CHECK(std::abs((y2 - y0) - 2 * d) < 0.5);
            CHECK(std::abs(x2 - x0) < 1e-9);
        }
    }
    SUBCASE("integer disparity moves the streak pixel for pixel") {
        Streak s{15.0, 15.0, 8.0, 1.0, std::numbers::pi / 2, 0.5, 2.0};
        LightField r = rasterize_streaks({s}, 1, 2, 32, 32);
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x + 2 < 32; ++x) REQUIRE(r.at(0, 1, 0, y, x + 2) == r.at(0, 0, 0, y, x));
    }
    SUBCASE("fixed seed is reproducible and seeds differ") {
        p.seed = 5;
        LightField a = rasterize_streaks(p, 3, 3, 24, 24);
        LightField b = rasterize_streaks(p, 3, 3, 24, 24);
        CHECK(a.data() == b.data());
        p.seed = 6;
        CHECK(rasterize_streaks(p, 3, 3, 24, 24).data() != a.data());
        for (double x : a.data()) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
    }
}

TEST_CASE("motion_blur") {
    LightField imp(1, 1, 1, 11, 11);
    imp.at(0, 0, 0, 5, 5) = 1.0;
    SUBCASE("length one is the identity") {
        SynthParams p;
        p.seed = 3;
        LightField r = rasterize_streaks(p, 2, 2, 16, 16);
        CHECK(motion_blur(r, 1, 0.4).data() == r.data());
    }
    SUBCASE("impulse along a row") {
        LightField b = motion_blur(imp, 5, 0.0);
        for (std::size_t y = 0; y < 11; ++y)
            for (std::size_t x = 0; x < 11; ++x) {
                const double expect = (y == 5 && x >= 3 && x <= 7) ? 0.2 : 0.0;
                CHECK(b.at(0, 0, 0, y, x) == doctest::Approx(expect).epsilon(1e-15));
            }
    }
    SUBCASE("interior mass is preserved for any angle") {
        for (double ang : {0.0, 0.3, 1.2, 1.5707963, 2.5}) {
            for (std::size_t len : {2u, 3u, 5u, 7u}) {
                LightField b = motion_blur(imp, len, ang);
                double s = 0;
                for (double x : b.data()) s += x;
                CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
        CHECK(blur_offsets(4, 0.0).size() == 4);
    }
}

TEST_CASE("depth_to_fog") {
    CHECK(fog_value(0.0, 1.8) == 0.0);
    CHECK(fog_value(1.0, 1.8) == doctest::Approx(0.83470).epsilon(1e-5));
    CHECK(std::abs(fog_value(1.0, 1.8) - (1.0 - std::exp(-1.8))) < 1e-15);
    CHECK_THROWS_AS(fog_value(-0.1, 1.8), DomainError);

    LightField d = procedural_depth(4, 3, 3, 16, 16);
    auto tf = depth_to_fog(d, 1.8);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(tf.fog.data()[i] == 1.0 - tf.transmission.data()[i]);
        CHECK(tf.fog.data()[i] >= 0.0);
        CHECK(tf.fog.data()[i] < 1.0);
    }
    double prev = -1;
    for (double z = 0; z < 3; z += 0.25) {
        CHECK(fog_value(z, 1.8) > prev);
        prev = fog_value(z, 1.8);
    }
}

TEST_CASE("compose") {
    SynthParams p;
    LightField B(1, 1, 3, 2, 2, 0.2), R(1, 1, 1, 2, 2, 0.5), A(1, 1, 1, 2, 2, 0.5), Z(1, 1, 1, 2, 2, 0.0);
    CHECK(compose(B, Z, Z, p).data() == B.data());
    const LightField I = compose(B, R, A, p);
    for (double x : I.data()) CHECK(x == doctest::Approx(0.7).epsilon(1e-15));
    CHECK_THROWS_AS(compose(B, LightField(1, 1, 1, 2, 3), A, p), ShapeError);

    SUBCASE("residual inversion off the clamp") {
        LightField clean = procedural_clean(7, 3, 3, 16, 16);
        LightField depth = procedural_depth(7, 3, 3, 16, 16);
        p.seed = 7;
        RainScene s = synth_scene(p, clean, depth);
        std::size_t checked = 0;
        for (std::size_t u = 0; u < 3; ++u)
            for (std::size_t v = 0; v < 3; ++v)
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t y = 0; y < 16; ++y)
                        for (std::size_t x = 0; x < 16; ++x) {
                            const double raw = clean.at(u, v, c, y, x) + p.alpha * s.streaks.at(u, v, 0, y, x) +
                                               (1 - p.alpha) * p.a0 * s.fog.at(u, v, 0, y, x);
                            if (raw <= 0.0 || raw >= 1.0) continue;
                            ++checked;
                            const double back = s.rainy.at(u, v, c, y, x) - p.alpha * s.streaks.at(u, v, 0, y, x) -
                                                (1 - p.alpha) * p.a0 * s.fog.at(u, v, 0, y, x);
                            REQUIRE(std::abs(back - clean.at(u, v, c, y, x)) < 1e-15);
                        }
        CHECK(checked > 1000);
    }
    SUBCASE("monotone in each input") {
        LightField B2(1, 1, 3, 2, 2, 0.3), R2(1, 1, 1, 2, 2, 0.6), A2(1, 1, 1, 2, 2, 0.7);
        const double base = compose(B, R, A, p).data()[0];
        CHECK(compose(B2, R, A, p).data()[0] >= base);
        CHECK(compose(B, R2, A, p).data()[0] >= base);
        CHECK(compose(B, R, A2, p).data()[0] >= base);
    }
}

TEST_CASE("synth_scene") {
    SynthParams p;
    p.seed = 11;
    LightField clean = procedural_clean(11, 5, 5, 32, 32);
    LightField depth = procedural_depth(11, 5, 5, 32, 32);
    RainScene s = synth_scene(p, clean, depth);
    CHECK(s.rainy.same_extents(clean));
    CHECK(s.streaks.channels() == 1);
    for (std::size_t i = 0; i < s.fog.size(); ++i) CHECK(s.fog.data()[i] == 1.0 - s.transmission.data()[i]);
    for (double x : s.rainy.data()) {
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 1.0);
    }
    for (double x : depth.data()) {
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 1.0);
    }
    CHECK(hash_values(synth_scene(p, clean, depth).rainy.data()) == hash_values(s.rainy.data()));
    SynthParams q = p;
    q.seed = 12;
    CHECK(synth_scene(q, clean, depth).static_streaks.data() != s.static_streaks.data());
    CHECK_THROWS_AS(synth_scene(p, clean, procedural_depth(11, 5, 5, 32, 31)), ShapeError);

    SUBCASE("procedural sources show parallax") {
        CHECK(clean.view(0, 0).data != clean.view(4, 4).data);
        CHECK(procedural_clean(11, 5, 5, 32, 32).data() == clean.data());
    }
}

TEST_CASE("manifest and kv round trip") {
    SynthParams p;
    p.alpha = 0.55;
    p.blur_angle = 0.1 + 0.2;
    p.seed = 123456789012345ULL;
    p.streak_count = 3;
    CHECK(parse_manifest(to_manifest(p)) == p);
    CHECK_THROWS_AS(parse_manifest("alpha = 1.5\n"), ContractError);
    CHECK_THROWS_AS(parse_manifest("alpha = abc\n"), FormatError);

    KeyValues kv = KeyValues::parse("# c\ntop = 1\n[a]\nx = 2\n[b]\ny = z\n");
    CHECK(kv.str("a.x") == "2");
    CHECK(KeyValues::parse(kv.serialize()).serialize() == kv.serialize());
    CHECK_THROWS_AS(KeyValues::parse("novalue\n"), FormatError);
}

TEST_CASE("scene directory layout") {
    SynthParams p;
    p.seed = 2;
    RainScene s = synth_scene(p, procedural_clean(2, 2, 2, 8, 8), procedural_depth(2, 2, 2, 8, 8));
    fs::path dir = fs::temp_directory_path() / "lfrain_test_scene";
    fs::remove_all(dir);
    write_scene(s, dir);
    for (const char* sub : {"input", "gt", "rain", "depth", "fog"}) CHECK(fs::exists(dir / sub / "view_1_1.png"));
    SceneData d = read_scene(dir);
    CHECK(oracle::max_abs_diff(d.rainy.data(), s.rainy.data()) <= 0.5 / 255 + 1e-12);
    CHECK(d.depth.channels() == 1);
    fs::remove_all(dir);
}
