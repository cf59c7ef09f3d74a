#include "lfrain/tensor/params.hpp"

#include "lfrain/errors.hpp"

#include <cmath>
#include <cstring>

namespace lfrain {

Tensor ParameterSet::make_value(const Shape& shape, std::vector<double> values, bool trainable) const {
    if (frozen_ || !trainable) return Tensor::constant(shape, std::move(values));
    return Tensor::leaf(shape, std::move(values));
}

std::size_t ParameterSet::add(std::string name, Shape shape, std::vector<double> values, bool trainable) {
    if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "' in " + name_);
    const std::size_t handle = entries_.size();
    index_.emplace(name, handle);
    entries_.push_back(Entry{std::move(name), make_value(shape, std::move(values), trainable), trainable});
    return handle;
}

std::size_t ParameterSet::add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng, bool trainable) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(shape.numel());
    for (double& x : v) x = dist(rng);
    return add(std::move(name), std::move(shape), std::move(v), trainable);
}

std::size_t ParameterSet::add_zeros(std::string name, Shape shape, bool trainable) {
    std::vector<double> v(shape.numel(), 0.0);
    return add(std::move(name), std::move(shape), std::move(v), trainable);
}

const Tensor& ParameterSet::get(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("no parameter '" + std::string(name) + "' in " + name_);
    return entries_[it->second].value;
}

std::size_t ParameterSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
}

void ParameterSet::set(std::size_t handle, std::vector<double> values) {
    Entry& e = entries_.at(handle);
    if (values.size() != e.value.numel()) {
        throw ContractError("parameter '" + name_ + "/" + e.name + "' expects " + std::to_string(e.value.numel()) +
                            " values, got " + std::to_string(values.size()));
    }
    e.value = make_value(e.value.shape(), std::move(values), e.trainable);
}

void ParameterSet::set(std::string_view name, std::vector<double> values) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("no parameter '" + std::string(name) + "' in " + name_);
    set(it->second, std::move(values));
}

void ParameterSet::zero_all() {
    for (std::size_t i = 0; i < entries_.size(); ++i) set(i, std::vector<double>(entries_[i].value.numel(), 0.0));
}

void ParameterSet::freeze() {
    frozen_ = true;
    for (auto& e : entries_) e.value = e.value.detach();
}

std::uint64_t ParameterSet::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& e : entries_) {
        mix(e.name.data(), e.name.size());
        for (std::size_t d : e.value.shape().dims()) mix(&d, sizeof d);
        auto v = e.value.values();
        mix(v.data(), v.size() * sizeof(double));
    }
    return h;
}

NamedTensors ParameterSet::export_tensors() const {
    NamedTensors out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.emplace_back(name_ + "/" + e.name, e.value.detach());
    return out;
}

void ParameterSet::import_tensors(const NamedTensors& tensors) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : tensors) by_name.emplace(name, &t);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const std::string full = name_ + "/" + entries_[i].name;
        auto it = by_name.find(full);
        if (it == by_name.end()) throw ContractError("checkpoint is missing tensor '" + full + "'");
        const Tensor& t = *it->second;
        if (t.shape() != entries_[i].value.shape()) {
            throw ContractError("checkpoint tensor '" + full + "' has shape " + t.shape().str() + ", expected " +
                                entries_[i].value.shape().str());
        }
        set(i, std::vector<double>(t.values().begin(), t.values().end()));
    }
}

void Adam::step(std::span<ParameterSet* const> sets, const Gradients& grads) {
    for (const ParameterSet* s : sets) {
        if (s->frozen()) throw ContractError("optimizer step on frozen parameter set '" + s->name() + "'");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (ParameterSet* s : sets) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            if (!s->trainable(i)) continue;
            const Tensor& p = (*s)[i];
            const std::string key = s->name() + "/" + s->name_of(i);
            auto [it, inserted] = moments_.try_emplace(key);
            if (inserted) {
                order_.push_back(key);
                it->second.m.assign(p.numel(), 0.0);
                it->second.v.assign(p.numel(), 0.0);
            }
            Moments& mo = it->second;
            const std::vector<double> g = grads.of(p);
            std::vector<double> next(p.values().begin(), p.values().end());
            for (std::size_t j = 0; j < next.size(); ++j) {
                mo.m[j] = cfg_.beta1 * mo.m[j] + (1.0 - cfg_.beta1) * g[j];
                mo.v[j] = cfg_.beta2 * mo.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mhat = mo.m[j] / bc1;
                const double vhat = mo.v[j] / bc2;
                next[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
            s->set(i, std::move(next));
        }
    }
}

NamedTensors Adam::export_state(std::string_view prefix) const {
    NamedTensors out;
    const std::string pre(prefix);
    out.emplace_back(pre + "t", Tensor::scalar(static_cast<double>(t_)));
    out.emplace_back(pre + "lr", Tensor::scalar(cfg_.lr));
    for (const std::string& key : order_) {
        const Moments& mo = moments_.at(key);
        const Shape s{mo.m.size()};
        out.emplace_back(pre + "m/" + key, Tensor::constant(s, mo.m));
        out.emplace_back(pre + "v/" + key, Tensor::constant(s, mo.v));
    }
    return out;
}

void Adam::import_state(const NamedTensors& tensors, std::string_view prefix) {
    const std::string pre(prefix);
    moments_.clear();
    order_.clear();
    t_ = 0;
    bool found_t = false;
    for (const auto& [name, t] : tensors) {
        if (name.rfind(pre, 0) != 0) continue;
        const std::string rest = name.substr(pre.size());
        if (rest == "t") {
            t_ = static_cast<std::uint64_t>(t.item());
            found_t = true;
        } else if (rest == "lr") {
            cfg_.lr = t.item();
        } else if (rest.rfind("m/", 0) == 0) {
            const std::string key = rest.substr(2);
            if (!moments_.contains(key)) order_.push_back(key);
            moments_[key].m.assign(t.values().begin(), t.values().end());
        } else if (rest.rfind("v/", 0) == 0) {
            const std::string key = rest.substr(2);
            if (!moments_.contains(key)) order_.push_back(key);
            moments_[key].v.assign(t.values().begin(), t.values().end());
        }
    }
    if (!found_t) throw ContractError("checkpoint has no optimizer state under '" + pre + "'");
}

double step_decay_lr(double base_lr, std::size_t epoch, std::size_t every, double factor) {
    if (every == 0) return base_lr;
    return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

} // namespace lfrain
