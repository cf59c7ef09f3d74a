#include "lfrain/tensor/shape.hpp"

#include "lfrain/errors.hpp"

#include <sstream>

namespace lfrain {

namespace {

void validate(const std::vector<std::size_t>& dims) {
    if (dims.empty()) throw ShapeError("shape must have at least one axis");
    for (std::size_t d : dims) {
        if (d == 0) throw ShapeError("shape axis length must be >= 1");
    }
}

} // namespace

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(dims_); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(dims_); }

std::size_t Shape::operator[](std::size_t axis) const {
    if (axis >= dims_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + str());
    }
    return dims_[axis];
}

std::size_t Shape::numel() const {
    std::size_t n = 1;
    for (std::size_t d : dims_) n *= d;
    return n;
}

std::vector<std::size_t> Shape::strides() const {
    std::vector<std::size_t> s(dims_.size(), 1);
    for (std::size_t i = dims_.size(); i-- > 1;) s[i - 1] = s[i] * dims_[i];
    return s;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ',';
        os << dims_[i];
    }
    os << ']';
    return os.str();
}

} // namespace lfrain
