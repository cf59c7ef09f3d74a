#include "lfrain/tensor/tensor.hpp"

#include "lfrain/errors.hpp"

#include <unordered_set>

namespace lfrain {

namespace {

thread_local bool g_grad_enabled = true;

NodePtr make_node(Shape shape, std::vector<double> values, bool requires_grad) {
    if (values.size() != shape.numel()) {
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape.str());
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return node;
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(make_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
    return Tensor(make_node(std::move(shape), std::move(values), true));
}

Tensor Tensor::full(Shape shape, double value) {
    std::vector<double> v(shape.numel(), value);
    return constant(std::move(shape), std::move(v));
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                       BackwardFn backward) {
    bool tracked = false;
    if (g_grad_enabled) {
        for (const Tensor& p : parents) tracked = tracked || p.requires_grad();
    }
    auto node = std::make_shared<Node>();
    if (values.size() != shape.numel()) {
        throw ShapeError("op produced " + std::to_string(values.size()) + " values for shape " +
                         shape.str());
    }
    node->shape = std::move(shape);
    node->value = std::move(values);
    if (tracked) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node_);
    }
    return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return node_->shape;
}

std::span<const double> Tensor::values() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.rank()) throw ShapeError("index rank mismatch for shape " + s.str());
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw BoundsError("index out of range for shape " + s.str());
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->value[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return node_ && node_->parents.empty(); }

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

bool Gradients::has(const Tensor& leaf) const { return grads_.contains(leaf.node()); }

std::vector<double> Gradients::of(const Tensor& leaf) const {
    auto it = grads_.find(leaf.node());
    if (it == grads_.end()) return std::vector<double>(leaf.numel(), 0.0);
    return it->second.grad;
}

Gradients backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() requires a scalar loss");
    }
    Gradients out;
    if (!loss.requires_grad()) return out;

    // Iterative post-order DFS; parent order fixes the sweep order so repeated
    // passes over identical tapes are bitwise reproducible.
    std::vector<NodePtr> order;
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(loss.node_ptr(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            const NodePtr& parent = node->parents[next++];
            if (parent->requires_grad && !seen.contains(parent.get())) {
                seen.insert(parent.get());
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<const Node*, std::vector<double>> grads;
    grads[loss.node()] = {1.0};
    std::vector<std::vector<double>*> parent_grads;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* node = it->get();
        if (node->parents.empty()) continue;
        auto g = grads.find(node);
        if (g == grads.end()) continue;
        // References survive rehashing; iterators do not.
        const std::vector<double>& grad_out = g->second;
        parent_grads.assign(node->parents.size(), nullptr);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            const Node* p = node->parents[i].get();
            if (!p->requires_grad) continue;
            auto& buf = grads[p];
            if (buf.empty()) buf.assign(p->value.size(), 0.0);
            parent_grads[i] = &buf;
        }
        node->backward(grad_out, parent_grads);
        grads.erase(node);
    }

    for (const NodePtr& node : order) {
        if (!node->parents.empty()) continue;
        auto g = grads.find(node.get());
        if (g == grads.end()) continue;
        out.grads_.emplace(node.get(), Gradients::Entry{node, std::move(g->second)});
    }
    return out;
}

} // namespace lfrain
