#pragma once

#include "lfrain/lightfield/lightfield.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lfrain {

// Angles are in radians in image coordinates: 0 points along +x (a row),
// pi/2 points down a column.

struct SynthParams {
    double alpha = 0.6;
    double beta = 1.8;
    double a0 = 1.0;

    std::size_t streak_count = 40;
    double length_min = 8.0, length_max = 20.0;
    double width_min = 0.8, width_max = 1.6;
    double angle_min = 1.3, angle_max = 1.85;
    double opacity_min = 0.35, opacity_max = 0.8;
    double disparity_min = 0.5, disparity_max = 2.0;

    std::size_t blur_length = 5;
    double blur_angle = 1.5707963267948966;

    std::uint64_t seed = 1;

    /// Throws ContractError naming the first field out of range.
    void validate() const;
    bool operator==(const SynthParams&) const = default;
};

/// One rendered streak in center-view coordinates.
struct Streak {
    double cx, cy;
    double length, width, angle, opacity;
    double disparity;
};

/// Seeded streak population for a frame of the given size.
std::vector<Streak> sample_streaks(const SynthParams& p, std::size_t height, std::size_t width);

/// Single-channel streak layer. Each streak is re-projected into view (u, v)
/// with its center moved by disparity * (v - vc, u - uc).
LightField rasterize_streaks(const std::vector<Streak>& streaks, std::size_t rows, std::size_t cols,
                             std::size_t height, std::size_t width);
LightField rasterize_streaks(const SynthParams& p, std::size_t rows, std::size_t cols, std::size_t height,
                             std::size_t width);

/// Normalized line kernel with `length` taps; each tap lands on the nearest
/// pixel offset along the blur direction.
std::vector<std::pair<int, int>> blur_offsets(std::size_t length, double angle);
LightField motion_blur(const LightField& streaks, std::size_t length, double angle);

/// Fog value for one depth sample: 1 - exp(-beta d). DomainError when d < 0.
double fog_value(double depth, double beta);

struct TransmissionFog {
    LightField transmission;
    LightField fog;
};
TransmissionFog depth_to_fog(const LightField& depth, double beta);

/// clamp(B + alpha R + (1 - alpha) A0 A, 0, 1). R and A may be
/// single-channel; they are then shared by every channel of B.
LightField compose(const LightField& clean, const LightField& rain, const LightField& fog, const SynthParams& p);

struct RainScene {
    LightField clean;
    LightField static_streaks;
    LightField streaks;
    LightField depth;
    LightField transmission;
    LightField fog;
    LightField rainy;
    SynthParams params;
};

RainScene synth_scene(const SynthParams& p, const LightField& clean, const LightField& depth);

/// Procedural sources: depth is a vertical ramp plus seeded low-frequency
/// noise in [0, 1]; the clean field is a smooth seeded texture warped per
/// view by a disparity that falls with depth.
LightField procedural_depth(std::uint64_t seed, std::size_t rows, std::size_t cols, std::size_t height,
                            std::size_t width);
LightField procedural_clean(std::uint64_t seed, std::size_t rows, std::size_t cols, std::size_t height,
                            std::size_t width);

class KeyValues;
/// Every SynthParams field as `prefix + name`. Reading leaves absent keys at
/// their current value.
void write_synth_params(KeyValues& kv, const std::string& prefix, const SynthParams& p);
void read_synth_params(const KeyValues& kv, const std::string& prefix, SynthParams& p);

std::string to_manifest(const SynthParams& p);
SynthParams parse_manifest(const std::string& text);

/// Writes input/, gt/, rain/, depth/, fog/ and manifest.txt under `dir`.
void write_scene(const RainScene& scene, const std::filesystem::path& dir);

/// Loaded training pair. Fields that are absent on disk stay empty; params
/// fall back to defaults without a manifest.
struct SceneData {
    std::string name;
    LightField rainy, clean, rain, depth;
    SynthParams params;
};
SceneData read_scene(const std::filesystem::path& dir);

} // namespace lfrain
