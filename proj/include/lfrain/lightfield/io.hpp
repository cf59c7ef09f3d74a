#pragma once

#include "lfrain/lightfield/lightfield.hpp"

#include <filesystem>

namespace lfrain {

// A light field on disk is a directory of 8-bit PNGs named view_{u}_{v}.png.
// Single-channel fields are written as grayscale, three-channel as RGB.
// Values map linearly between [0, 1] and [0, 255].

/// Throws FormatError for a missing view (naming it), mixed sizes or
/// channel counts, or files that are not 8-bit.
LightField read_lfi(const std::filesystem::path& dir);

/// Values are clamped to [0, 1] before quantization. Creates `dir`.
void write_lfi(const LightField& lf, const std::filesystem::path& dir);

Image read_png(const std::filesystem::path& file);
void write_png(const Image& img, const std::filesystem::path& file);

} // namespace lfrain
