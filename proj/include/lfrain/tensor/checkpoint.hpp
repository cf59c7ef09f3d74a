#pragma once

#include "lfrain/tensor/params.hpp"

#include <filesystem>

namespace lfrain {

// Checkpoint layout (all integers unsigned 64-bit little-endian, values IEEE
// 754 binary64 little-endian):
//   count
//   repeated count times: name_len, name bytes, rank, dims[rank], values[prod(dims)]

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
/// Throws FormatError on truncated or malformed files.
NamedTensors load_tensors(const std::filesystem::path& path);

/// Looks up a tensor by exact name; throws ContractError when absent.
const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name);

} // namespace lfrain
