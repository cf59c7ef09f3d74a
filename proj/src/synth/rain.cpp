#include "lfrain/synth/rain.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/lightfield/io.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/util/kv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lfrain {

namespace fs = std::filesystem;

void SynthParams::validate() const {
    auto range = [](const char* name, double lo, double hi) {
        if (!(lo <= hi)) throw ContractError(std::string("synth ") + name + " range is inverted");
    };
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("synth alpha must lie in (0, 1)");
    if (!(beta > 0.0)) throw ContractError("synth beta must be positive");
    if (!(a0 > 0.0 && a0 <= 1.0)) throw ContractError("synth a0 must lie in (0, 1]");
    range("length", length_min, length_max);
    range("width", width_min, width_max);
    range("angle", angle_min, angle_max);
    range("opacity", opacity_min, opacity_max);
    range("disparity", disparity_min, disparity_max);
    if (!(length_min > 0.0)) throw ContractError("synth length_min must be positive");
    if (!(width_min > 0.0)) throw ContractError("synth width_min must be positive");
    if (!(opacity_min >= 0.0 && opacity_max <= 1.0)) throw ContractError("synth opacity must lie in [0, 1]");
    if (blur_length == 0) throw ContractError("synth blur_length must be at least 1");
}

std::vector<Streak> sample_streaks(const SynthParams& p, std::size_t height, std::size_t width) {
    p.validate();
    Rng rng(split_seed(p.seed, "streaks"));
    auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    std::vector<Streak> out;
    out.reserve(p.streak_count);
    for (std::size_t i = 0; i < p.streak_count; ++i) {
        Streak s{};
        s.cx = uni(0.0, static_cast<double>(width));
        s.cy = uni(0.0, static_cast<double>(height));
        s.length = uni(p.length_min, p.length_max);
        s.width = uni(p.width_min, p.width_max);
        s.angle = uni(p.angle_min, p.angle_max);
        s.opacity = uni(p.opacity_min, p.opacity_max);
        s.disparity = uni(p.disparity_min, p.disparity_max);
        out.push_back(s);
    }
    return out;
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

} // namespace

LightField rasterize_streaks(const std::vector<Streak>& streaks, std::size_t rows, std::size_t cols,
                             std::size_t height, std::size_t width) {
    LightField layer(rows, cols, 1, height, width);
    const double uc = (static_cast<double>(rows) - 1.0) / 2.0;
    const double vc = (static_cast<double>(cols) - 1.0) / 2.0;
    const long H = static_cast<long>(height), W = static_cast<long>(width);
    for (std::size_t u = 0; u < rows; ++u)
        for (std::size_t v = 0; v < cols; ++v)
            for (const Streak& s : streaks) {
                const double cx = s.cx + s.disparity * (static_cast<double>(v) - vc);
                const double cy = s.cy + s.disparity * (static_cast<double>(u) - uc);
                const double hx = 0.5 * s.length * std::cos(s.angle), hy = 0.5 * s.length * std::sin(s.angle);
                const double ax = cx - hx, ay = cy - hy, bx = cx + hx, by = cy + hy;
                const double reach = 0.5 * s.width + 1.0;
                const long x0 = std::max(0L, static_cast<long>(std::floor(std::min(ax, bx) - reach)));
                const long x1 = std::min(W - 1, static_cast<long>(std::ceil(std::max(ax, bx) + reach)));
                const long y0 = std::max(0L, static_cast<long>(std::floor(std::min(ay, by) - reach)));
                const long y1 = std::min(H - 1, static_cast<long>(std::ceil(std::max(ay, by) + reach)));
                for (long y = y0; y <= y1; ++y)
                    for (long x = x0; x <= x1; ++x) {
                        const double d = segment_distance(static_cast<double>(x), static_cast<double>(y), ax, ay, bx, by);
                        const double cover = std::clamp(0.5 * s.width + 0.5 - d, 0.0, 1.0);
                        if (cover > 0.0) layer.at(u, v, 0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += s.opacity * cover;
                    }
            }
    for (double& x : layer.data()) x = std::min(x, 1.0);
    return layer;
}

LightField rasterize_streaks(const SynthParams& p, std::size_t rows, std::size_t cols, std::size_t height,
                             std::size_t width) {
    return rasterize_streaks(sample_streaks(p, height, width), rows, cols, height, width);
}

std::vector<std::pair<int, int>> blur_offsets(std::size_t length, double angle) {
    if (length == 0) throw ContractError("blur length must be at least 1");
    std::vector<std::pair<int, int>> taps;
    const double mid = (static_cast<double>(length) - 1.0) / 2.0;
    for (std::size_t k = 0; k < length; ++k) {
        const double t = static_cast<double>(k) - mid;
        taps.emplace_back(static_cast<int>(std::lround(t * std::sin(angle))),
                          static_cast<int>(std::lround(t * std::cos(angle))));
    }
    return taps;
}

LightField motion_blur(const LightField& in, std::size_t length, double angle) {
    if (length == 1) return in;
    const auto taps = blur_offsets(length, angle);
    const double w = 1.0 / static_cast<double>(length);
    LightField out(in.rows(), in.cols(), in.channels(), in.height(), in.width());
    const long H = static_cast<long>(in.height()), W = static_cast<long>(in.width());
    for (std::size_t u = 0; u < in.rows(); ++u)
        for (std::size_t v = 0; v < in.cols(); ++v)
            for (std::size_t c = 0; c < in.channels(); ++c)
                for (long y = 0; y < H; ++y)
                    for (long x = 0; x < W; ++x) {
                        const double val = in.at(u, v, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                        if (val == 0.0) continue;
                        // Scatter form: each source pixel spreads along the line.
                        for (const auto& [dy, dx] : taps) {
                            const long ty = y + dy, tx = x + dx;
                            if (ty < 0 || ty >= H || tx < 0 || tx >= W) continue;
                            out.at(u, v, c, static_cast<std::size_t>(ty), static_cast<std::size_t>(tx)) += w * val;
                        }
                    }
    return out;
}

double fog_value(double depth, double beta) {
    if (depth < 0.0) throw DomainError("negative depth " + format_double(depth));
    return 1.0 - std::exp(-beta * depth);
}

TransmissionFog depth_to_fog(const LightField& depth, double beta) {
    TransmissionFog out{LightField(depth.rows(), depth.cols(), depth.channels(), depth.height(), depth.width()),
                        LightField(depth.rows(), depth.cols(), depth.channels(), depth.height(), depth.width())};
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double a = fog_value(depth.data()[i], beta);
        out.fog.data()[i] = a;
        out.transmission.data()[i] = 1.0 - a;
    }
    return out;
}

LightField compose(const LightField& clean, const LightField& rain, const LightField& fog, const SynthParams& p) {
    auto compatible = [&clean](const LightField& f) {
        return f.rows() == clean.rows() && f.cols() == clean.cols() && f.height() == clean.height() &&
               f.width() == clean.width() && (f.channels() == 1 || f.channels() == clean.channels());
    };
    if (!compatible(rain) || !compatible(fog)) throw ShapeError("compose: rain or fog layer does not match the clean field");
    LightField out(clean.rows(), clean.cols(), clean.channels(), clean.height(), clean.width());
    for (std::size_t u = 0; u < clean.rows(); ++u)
        for (std::size_t v = 0; v < clean.cols(); ++v)
            for (std::size_t c = 0; c < clean.channels(); ++c) {
                const std::size_t rc = rain.channels() == 1 ? 0 : c, fc = fog.channels() == 1 ? 0 : c;
                for (std::size_t y = 0; y < clean.height(); ++y)
                    for (std::size_t x = 0; x < clean.width(); ++x) {
                        const double i = clean.at(u, v, c, y, x) + p.alpha * rain.at(u, v, rc, y, x) +
                                         (1.0 - p.alpha) * p.a0 * fog.at(u, v, fc, y, x);
                        out.at(u, v, c, y, x) = std::clamp(i, 0.0, 1.0);
                    }
            }
    return out;
}

RainScene synth_scene(const SynthParams& p, const LightField& clean, const LightField& depth) {
    p.validate();
    if (depth.channels() != 1 || depth.rows() != clean.rows() || depth.cols() != clean.cols() ||
        depth.height() != clean.height() || depth.width() != clean.width()) {
        throw ShapeError("synth: depth source is not aligned with the clean source");
    }
    RainScene s;
    s.params = p;
    s.clean = clean;
    s.depth = depth;
    s.static_streaks = rasterize_streaks(p, clean.rows(), clean.cols(), clean.height(), clean.width());
    s.streaks = motion_blur(s.static_streaks, p.blur_length, p.blur_angle);
    auto tf = depth_to_fog(depth, p.beta);
    s.transmission = std::move(tf.transmission);
    s.fog = std::move(tf.fog);
    s.rainy = compose(clean, s.streaks, s.fog, p);
    return s;
}

namespace {

struct Wave {
    double fx, fy, phase, amp;
};

struct Blob {
    double x, y, radius, depth;
    double color[3];
};

// Continuous scene description shared by the depth and clean generators.
struct ProceduralScene {
    std::vector<Wave> depth_waves;
    std::vector<Wave> color_waves[3];
    double base[3];
    std::vector<Blob> blobs;
    double height, width;

    ProceduralScene(std::uint64_t seed, std::size_t h, std::size_t w)
        : height(static_cast<double>(h)), width(static_cast<double>(w)) {
        Rng rng(split_seed(seed, "procedural"));
        auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
        for (int k = 0; k < 3; ++k) depth_waves.push_back({uni(0.3, 1.5), uni(0.3, 1.5), uni(0, 6.283), uni(0.02, 0.06)});
        for (int c = 0; c < 3; ++c) {
            base[c] = uni(0.2, 0.4);
            for (int k = 0; k < 4; ++k) color_waves[c].push_back({uni(-4, 4), uni(-4, 4), uni(0, 6.283), uni(0.02, 0.06)});
        }
        const int nb = 3 + static_cast<int>(rng() % 3);
        for (int b = 0; b < nb; ++b) {
            Blob bl{uni(0, width), uni(0, height), uni(0.08, 0.2) * std::min(width, height), uni(0.1, 0.5), {}};
            for (double& c : bl.color) c = uni(0.05, 0.55);
            blobs.push_back(bl);
        }
    }

    double ramp_depth(double x, double y) const {
        double d = 0.15 + 0.7 * (1.0 - y / std::max(1.0, height - 1.0));
        for (const Wave& wv : depth_waves)
            d += wv.amp * std::sin(2 * std::numbers::pi * (wv.fx * x / width + wv.fy * y / height) + wv.phase);
        return d;
    }

    // Soft blob mask in [0, 1].
    static double mask(const Blob& b, double x, double y) {
        const double r = std::hypot(x - b.x, y - b.y);
        return std::clamp(b.radius + 0.5 - r, 0.0, 1.0);
    }

    double depth_at(double x, double y) const {
        double d = ramp_depth(x, y);
        for (const Blob& b : blobs) {
            const double m = mask(b, x, y);
            d = (1 - m) * d + m * std::min(d, b.depth);
        }
        return std::clamp(d, 0.0, 1.0);
    }

    double color_at(int c, double x, double y) const {
        double v = base[c];
        for (const Wave& wv : color_waves[c])
            v += wv.amp * std::sin(2 * std::numbers::pi * (wv.fx * x / width + wv.fy * y / height) + wv.phase);
        for (const Blob& b : blobs) {
            const double m = mask(b, x, y);
            v = (1 - m) * v + m * b.color[c];
        }
        return std::clamp(v, 0.0, 1.0);
    }

    // Per-view disparity per unit angular step: near content moves most.
    static double disparity(double depth) { return 1.2 * (0.5 - depth); }
};

template <class F>
LightField render(std::size_t rows, std::size_t cols, std::size_t channels, std::size_t h, std::size_t w,
                  const ProceduralScene& sc, F&& value) {
    LightField lf(rows, cols, channels, h, w);
    const double uc = (static_cast<double>(rows) - 1.0) / 2.0, vc = (static_cast<double>(cols) - 1.0) / 2.0;
    for (std::size_t u = 0; u < rows; ++u)
        for (std::size_t v = 0; v < cols; ++v)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double px = static_cast<double>(x), py = static_cast<double>(y);
                    const double s = ProceduralScene::disparity(sc.depth_at(px, py));
                    const double sx = px - s * (static_cast<double>(v) - vc);
                    const double sy = py - s * (static_cast<double>(u) - uc);
                    for (std::size_t c = 0; c < channels; ++c) lf.at(u, v, c, y, x) = value(static_cast<int>(c), sx, sy);
                }
    return lf;
}

} // namespace

LightField procedural_depth(std::uint64_t seed, std::size_t rows, std::size_t cols, std::size_t height,
                            std::size_t width) {
    ProceduralScene sc(seed, height, width);
    return render(rows, cols, 1, height, width, sc, [&sc](int, double x, double y) { return sc.depth_at(x, y); });
}

LightField procedural_clean(std::uint64_t seed, std::size_t rows, std::size_t cols, std::size_t height,
                            std::size_t width) {
    ProceduralScene sc(seed, height, width);
    return render(rows, cols, 3, height, width, sc, [&sc](int c, double x, double y) { return sc.color_at(c, x, y); });
}

namespace {

template <class F>
void visit_params(F&& f, SynthParams& p) {
    f("alpha", p.alpha);
    f("beta", p.beta);
    f("a0", p.a0);
    f("streak_count", p.streak_count);
    f("length_min", p.length_min);
    f("length_max", p.length_max);
    f("width_min", p.width_min);
    f("width_max", p.width_max);
    f("angle_min", p.angle_min);
    f("angle_max", p.angle_max);
    f("opacity_min", p.opacity_min);
    f("opacity_max", p.opacity_max);
    f("disparity_min", p.disparity_min);
    f("disparity_max", p.disparity_max);
    f("blur_length", p.blur_length);
    f("blur_angle", p.blur_angle);
    f("seed", p.seed);
}

} // namespace

void write_synth_params(KeyValues& kv, const std::string& prefix, const SynthParams& p) {
    SynthParams copy = p;
    visit_params([&](const char* key, auto& v) { kv.set(prefix + key, v); }, copy);
}

void read_synth_params(const KeyValues& kv, const std::string& prefix, SynthParams& p) {
    visit_params([&](const char* key, auto& v) { kv.read(prefix + key, v); }, p);
}

std::string to_manifest(const SynthParams& p) {
    KeyValues kv;
    write_synth_params(kv, "", p);
    return kv.serialize();
}

SynthParams parse_manifest(const std::string& text) {
    KeyValues kv = KeyValues::parse(text);
    SynthParams p;
    read_synth_params(kv, "", p);
    p.validate();
    return p;
}

void write_scene(const RainScene& s, const fs::path& dir) {
    write_lfi(s.rainy, dir / "input");
    write_lfi(s.clean, dir / "gt");
    write_lfi(s.streaks, dir / "rain");
    write_lfi(s.depth, dir / "depth");
    write_lfi(s.fog, dir / "fog");
    std::ofstream m(dir / "manifest.txt");
    if (!m) throw FormatError("cannot write " + (dir / "manifest.txt").string());
    m << to_manifest(s.params) << "depth_scale = 1\n";
}

SceneData read_scene(const fs::path& dir) {
    SceneData d;
    d.name = dir.filename().string();
    d.rainy = read_lfi(dir / "input");
    if (fs::exists(dir / "gt")) d.clean = read_lfi(dir / "gt");
    if (fs::exists(dir / "rain")) d.rain = read_lfi(dir / "rain");
    if (fs::exists(dir / "depth")) d.depth = read_lfi(dir / "depth");
    if (fs::exists(dir / "manifest.txt")) {
        std::ifstream m(dir / "manifest.txt");
        std::stringstream text;
        text << m.rdbuf();
        d.params = parse_manifest(text.str());
    }
    return d;
}

} // namespace lfrain
