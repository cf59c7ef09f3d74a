#pragma once

#include "lfrain/tensor/conv.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/tensor/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lfrain {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Ordered, named collection of trainable leaves belonging to one network.
///
/// Networks register their weights here and read them back by handle on every
/// forward pass; optimizers swap in fresh leaves after each step. A frozen set
/// holds untracked constants and refuses optimizer updates.
class ParameterSet {
public:
    explicit ParameterSet(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }

    /// Registers a parameter and returns its handle.
    std::size_t add(std::string name, Shape shape, std::vector<double> values, bool trainable = true);
    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    std::size_t add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng, bool trainable = true);
    std::size_t add_zeros(std::string name, Shape shape, bool trainable = true);

    const Tensor& operator[](std::size_t handle) const { return entries_.at(handle).value; }
    const Tensor& get(std::string_view name) const;
    const std::string& name_of(std::size_t handle) const { return entries_.at(handle).name; }
    bool trainable(std::size_t handle) const { return entries_.at(handle).trainable; }
    std::size_t size() const { return entries_.size(); }
    std::size_t parameter_count() const;

    /// Replaces the values of an existing parameter (shape must match).
    void set(std::size_t handle, std::vector<double> values);
    void set(std::string_view name, std::vector<double> values);

    /// Sets every parameter to zero (null-network configurations).
    void zero_all();

    void freeze();
    bool frozen() const { return frozen_; }

    /// FNV-1a over names, shapes and value bits.
    std::uint64_t checksum() const;

    /// Entries as "<set>/<param>" named tensors.
    NamedTensors export_tensors() const;
    /// Loads every parameter from `tensors`; throws ContractError naming the
    /// first missing or incompatibly shaped tensor.
    void import_tensors(const NamedTensors& tensors);

    ConvKernel4d conv4d_kernel(std::size_t weights, std::size_t bias) const {
        return ConvKernel4d{(*this)[weights], (*this)[bias]};
    }

private:
    struct Entry {
        std::string name;
        Tensor value;
        bool trainable;
    };
    Tensor make_value(const Shape& shape, std::vector<double> values, bool trainable) const;

    std::string name_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    bool frozen_ = false;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over one or more parameter sets. Moment buffers are keyed by
/// "<set>/<param>" so the optimizer state can be checkpointed.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// One update of every trainable parameter in `sets`. Throws
    /// ContractError if any set is frozen.
    void step(std::span<ParameterSet* const> sets, const Gradients& grads);
    void step(ParameterSet& set, const Gradients& grads) {
        ParameterSet* one[] = {&set};
        step(one, grads);
    }

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::uint64_t steps() const { return t_; }

    NamedTensors export_state(std::string_view prefix) const;
    void import_state(const NamedTensors& tensors, std::string_view prefix);

private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<std::string> order_;
    std::unordered_map<std::string, Moments> moments_;
};

/// Step decay: lr * factor^(floor(epoch / every)).
double step_decay_lr(double base_lr, std::size_t epoch, std::size_t every, double factor);

} // namespace lfrain
