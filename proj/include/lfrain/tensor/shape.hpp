#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace lfrain {

/// Ordered list of positive axis lengths. Element count is always > 0.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const;
    std::size_t numel() const;
    const std::vector<std::size_t>& dims() const { return dims_; }

    /// Row-major strides in elements.
    std::vector<std::size_t> strides() const;

    bool operator==(const Shape& other) const = default;

    std::string str() const;

private:
    std::vector<std::size_t> dims_;
};

} // namespace lfrain
