#include "lfrain/tensor/checkpoint.hpp"

#include "lfrain/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace lfrain {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& is, const std::filesystem::path& path) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw FormatError("truncated checkpoint " + path.string());
    }
    return v;
}

} // namespace

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    put_u64(os, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(os, t.rank());
        for (std::size_t d : t.shape().dims()) put_u64(os, d);
        auto v = t.values();
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw FormatError("write failed for " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint " + path.string());
    const std::uint64_t count = get_u64(is, path);
    NamedTensors out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t len = get_u64(is, path);
        if (len > (1u << 20)) throw FormatError("implausible tensor name length in " + path.string());
        std::string name(len, '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated checkpoint " + path.string());
        const std::uint64_t rank = get_u64(is, path);
        if (rank == 0 || rank > 16) throw FormatError("bad rank for tensor '" + name + "' in " + path.string());
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = get_u64(is, path);
        Shape shape(dims);
        std::vector<double> values(shape.numel());
        if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
            throw FormatError("truncated values for tensor '" + name + "' in " + path.string());
        }
        out.emplace_back(std::move(name), Tensor::constant(std::move(shape), std::move(values)));
    }
    return out;
}

const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name) {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw ContractError("checkpoint is missing tensor '" + std::string(name) + "'");
}

} // namespace lfrain
