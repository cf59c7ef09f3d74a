#pragma once

#include "lfrain/tensor/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace lfrain {

/// One sub-view or any other [C, H, W] planar image.
struct Image {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

/// Pixel rectangle inside a sub-view.
struct PatchSpec {
    std::size_t y = 0, x = 0;
    std::size_t height = 0, width = 0;

    bool operator==(const PatchSpec&) const = default;
};

/// Sub-view grid stored as [U, V, C, H, W].
class LightField {
public:
    LightField() = default;
    LightField(std::size_t rows, std::size_t cols, std::size_t channels, std::size_t height, std::size_t width,
               double fill = 0.0);

    std::size_t rows() const { return u_; }
    std::size_t cols() const { return v_; }
    std::size_t channels() const { return c_; }
    std::size_t height() const { return h_; }
    std::size_t width() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t u, std::size_t v, std::size_t c, std::size_t y, std::size_t x) {
        return data_[index(u, v, c, y, x)];
    }
    double at(std::size_t u, std::size_t v, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[index(u, v, c, y, x)];
    }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Image view(std::size_t u, std::size_t v) const;
    void set_view(std::size_t u, std::size_t v, const Image& img);
    Image center_view() const { return view(u_ / 2, v_ / 2); }

    bool same_extents(const LightField& other) const;
    /// Throws BoundsError if the patch leaves the frame.
    void check_patch(const PatchSpec& p) const;
    LightField crop(const PatchSpec& p) const;
    /// Writes `part` into this field at the patch origin.
    void paste(const LightField& part, std::size_t y, std::size_t x);

    /// Grid shape [U, V, C, H, W] as a tensor, values shared by copy.
    Tensor to_tensor() const;
    static LightField from_tensor(const Tensor& t);

private:
    std::size_t index(std::size_t u, std::size_t v, std::size_t c, std::size_t y, std::size_t x) const {
        return (((u * v_ + v) * c_ + c) * h_ + y) * w_ + x;
    }
    std::size_t u_ = 0, v_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

/// Angular rows regrouped as units: data is [S, C, V, h, w] with S = U.
struct EpiUnitStack {
    Tensor data;
    std::string source;
    PatchSpec patch;
    std::size_t source_rows = 0, source_cols = 0;

    std::size_t units() const { return data.shape()[0]; }
};

EpiUnitStack to_epi_units(const LightField& lf, const PatchSpec& patch, std::string source = {});
/// Whole-frame stack.
EpiUnitStack to_epi_units(const LightField& lf, std::string source = {});
/// Inverse of to_epi_units: returns the cropped region as a light field.
/// Throws ContractError when the data disagrees with its provenance.
LightField from_epi_units(const EpiUnitStack& stack);

/// [S, C, V, h, w] tensor to a light field with U = S, without provenance checks.
LightField stack_to_lightfield(const Tensor& stack);
/// Light field to an [S, C, V, H, W] tensor.
Tensor lightfield_to_stack(const LightField& lf);

} // namespace lfrain
