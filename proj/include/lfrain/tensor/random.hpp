#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lfrain {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named component from a master seed.
std::uint64_t split_seed(std::uint64_t master, std::string_view component);

/// Derives a seed from a master seed and an integer stream index.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

} // namespace lfrain
