#pragma once

#include "lfrain/tensor/shape.hpp"

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace lfrain {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Propagates a node's output gradient into its parents' gradient buffers.
/// `parent_grads[i]` is null when parent i is not tracked; otherwise it is a
/// buffer sized like the parent that the callback accumulates into.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<std::vector<double>* const> parent_grads)>;

/// One value on the gradient tape. Immutable once constructed.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<NodePtr> parents;
    BackwardFn backward;
    bool requires_grad = false;
};

/// Dense row-major array of 64-bit reals paired with an optional tape node.
/// Copies are cheap and share the underlying node.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    /// A tracked leaf: backward() reports a gradient for it.
    static Tensor leaf(Shape shape, std::vector<double> values);
    static Tensor full(Shape shape, double value);
    static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
    static Tensor scalar(double value) { return constant(Shape{1}, {value}); }

    /// Builds the result of a differentiable op. The backward callback and the
    /// parent links are dropped when no parent is tracked or grad mode is off.
    static Tensor from_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                          BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::span<const double> values() const;
    std::size_t numel() const { return shape().numel(); }
    std::size_t rank() const { return shape().rank(); }
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    bool is_leaf() const;
    const Node* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }

    /// Same values, cut from the tape.
    Tensor detach() const;

private:
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}
    NodePtr node_;
};

/// Gradients of one backward pass, keyed by tracked leaf.
class Gradients {
public:
    bool has(const Tensor& leaf) const;
    /// Gradient for `leaf`; all zeros when the leaf did not influence the loss.
    std::vector<double> of(const Tensor& leaf) const;
    std::size_t size() const { return grads_.size(); }

private:
    friend Gradients backward(const Tensor& loss);
    struct Entry {
        NodePtr node;
        std::vector<double> grad;
    };
    std::unordered_map<const Node*, Entry> grads_;
};

/// Reverse-mode sweep from a scalar loss. Throws ContractError for a
/// non-scalar loss.
Gradients backward(const Tensor& loss);

/// Whether newly created op results record tape links (thread-local).
bool grad_enabled();

/// Disables tape recording for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

} // namespace lfrain
