#include "lfrain/lightfield/lightfield.hpp"

#include "lfrain/errors.hpp"

#include <algorithm>

namespace lfrain {

LightField::LightField(std::size_t rows, std::size_t cols, std::size_t channels, std::size_t height,
                       std::size_t width, double fill)
    : u_(rows), v_(cols), c_(channels), h_(height), w_(width) {
    if (rows == 0 || cols == 0 || channels == 0 || height == 0 || width == 0) {
        throw ShapeError("light field extents must be positive");
    }
    data_.assign(rows * cols * channels * height * width, fill);
}

Image LightField::view(std::size_t u, std::size_t v) const {
    if (u >= u_ || v >= v_) throw BoundsError("sub-view index out of range");
    Image img(c_, h_, w_);
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(index(u, v, 0, 0, 0));
    std::copy(first, first + static_cast<std::ptrdiff_t>(img.data.size()), img.data.begin());
    return img;
}

void LightField::set_view(std::size_t u, std::size_t v, const Image& img) {
    if (u >= u_ || v >= v_) throw BoundsError("sub-view index out of range");
    if (img.channels != c_ || img.height != h_ || img.width != w_) throw ShapeError("sub-view shape mismatch");
    std::copy(img.data.begin(), img.data.end(), data_.begin() + static_cast<std::ptrdiff_t>(index(u, v, 0, 0, 0)));
}

bool LightField::same_extents(const LightField& o) const {
    return u_ == o.u_ && v_ == o.v_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
}

void LightField::check_patch(const PatchSpec& p) const {
    if (p.height == 0 || p.width == 0 || p.y + p.height > h_ || p.x + p.width > w_) {
        throw BoundsError("patch (" + std::to_string(p.y) + "," + std::to_string(p.x) + ") size " +
                          std::to_string(p.height) + "x" + std::to_string(p.width) + " exceeds frame " +
                          std::to_string(h_) + "x" + std::to_string(w_));
    }
}

LightField LightField::crop(const PatchSpec& p) const {
    check_patch(p);
    LightField out(u_, v_, c_, p.height, p.width);
    for (std::size_t u = 0; u < u_; ++u)
        for (std::size_t v = 0; v < v_; ++v)
            for (std::size_t c = 0; c < c_; ++c)
                for (std::size_t y = 0; y < p.height; ++y)
                    for (std::size_t x = 0; x < p.width; ++x) out.at(u, v, c, y, x) = at(u, v, c, p.y + y, p.x + x);
    return out;
}

void LightField::paste(const LightField& part, std::size_t y0, std::size_t x0) {
    if (part.u_ != u_ || part.v_ != v_ || part.c_ != c_) throw ShapeError("paste: grid or channel mismatch");
    check_patch(PatchSpec{y0, x0, part.h_, part.w_});
    for (std::size_t u = 0; u < u_; ++u)
        for (std::size_t v = 0; v < v_; ++v)
            for (std::size_t c = 0; c < c_; ++c)
                for (std::size_t y = 0; y < part.h_; ++y)
                    for (std::size_t x = 0; x < part.w_; ++x) at(u, v, c, y0 + y, x0 + x) = part.at(u, v, c, y, x);
}

Tensor LightField::to_tensor() const { return Tensor::constant(Shape{u_, v_, c_, h_, w_}, data_); }

LightField LightField::from_tensor(const Tensor& t) {
    if (t.rank() != 5) throw ShapeError("light field tensor must be rank 5, got " + t.shape().str());
    const Shape& s = t.shape();
    LightField lf(s[0], s[1], s[2], s[3], s[4]);
    std::copy(t.values().begin(), t.values().end(), lf.data_.begin());
    return lf;
}

EpiUnitStack to_epi_units(const LightField& lf, const PatchSpec& patch, std::string source) {
    lf.check_patch(patch);
    const std::size_t S = lf.rows(), C = lf.channels(), V = lf.cols(), h = patch.height, w = patch.width;
    std::vector<double> out(S * C * V * h * w);
    std::size_t i = 0;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t v = 0; v < V; ++v)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) out[i++] = lf.at(s, v, c, patch.y + y, patch.x + x);
    return EpiUnitStack{Tensor::constant(Shape{S, C, V, h, w}, std::move(out)), std::move(source), patch, S, V};
}

EpiUnitStack to_epi_units(const LightField& lf, std::string source) {
    return to_epi_units(lf, PatchSpec{0, 0, lf.height(), lf.width()}, std::move(source));
}

LightField from_epi_units(const EpiUnitStack& stack) {
    if (!stack.data.defined() || stack.data.rank() != 5) throw ContractError("unit stack must hold rank-5 data");
    const Shape& s = stack.data.shape();
    if (s[0] != stack.source_rows || s[2] != stack.source_cols || s[3] != stack.patch.height ||
        s[4] != stack.patch.width) {
        throw ContractError("unit stack " + s.str() + " disagrees with its provenance (" +
                            std::to_string(stack.source_rows) + "x" + std::to_string(stack.source_cols) + " grid, " +
                            std::to_string(stack.patch.height) + "x" + std::to_string(stack.patch.width) + " patch)");
    }
    return stack_to_lightfield(stack.data);
}

LightField stack_to_lightfield(const Tensor& t) {
    if (t.rank() != 5) throw ShapeError("unit stack must be rank 5, got " + t.shape().str());
    const Shape& s = t.shape();
    const std::size_t S = s[0], C = s[1], V = s[2], h = s[3], w = s[4];
    LightField lf(S, V, C, h, w);
    auto vals = t.values();
    std::size_t i = 0;
    for (std::size_t u = 0; u < S; ++u)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t v = 0; v < V; ++v)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) lf.at(u, v, c, y, x) = vals[i++];
    return lf;
}

Tensor lightfield_to_stack(const LightField& lf) { return to_epi_units(lf).data; }

} // namespace lfrain
