#include "lfrain/tensor/gradcheck.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/params.hpp"
#include "lfrain/tensor/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfrain {

namespace {

double eval_scalar(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    NoGradGuard guard;
    const double v = f(x).item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite function value");
    return v;
}

} // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, std::size_t samples,
                         double h, std::uint64_t seed) {
    for (double v : x.values()) {
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite input");
    }
    std::vector<double> base(x.values().begin(), x.values().end());
    Tensor tracked = Tensor::leaf(x.shape(), base);
    Tensor y = f(tracked);
    if (!std::isfinite(y.item())) throw NumericError("finite_diff_check: non-finite function value");
    const std::vector<double> analytic = backward(y).of(tracked);

    std::vector<std::size_t> coords(base.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (samples < coords.size()) {
        Rng rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(samples);
    }

    double worst = 0.0;
    for (std::size_t i : coords) {
        std::vector<double> plus = base, minus = base;
        plus[i] += h;
        minus[i] -= h;
        const double fp = eval_scalar(f, Tensor::constant(x.shape(), std::move(plus)));
        const double fm = eval_scalar(f, Tensor::constant(x.shape(), std::move(minus)));
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

double finite_diff_check_params(const std::function<Tensor()>& loss, ParameterSet& params, std::size_t samples,
                                double h, std::uint64_t seed) {
    Tensor y = loss();
    if (!std::isfinite(y.item())) throw NumericError("finite_diff_check_params: non-finite loss");
    const Gradients grads = backward(y);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params.trainable(p) || params.frozen()) continue;
        for (std::size_t i = 0; i < params[p].numel(); ++i) coords.emplace_back(p, i);
    }
    if (coords.empty()) throw ContractError("finite_diff_check_params: no trainable parameters");
    Rng rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (samples < coords.size()) coords.resize(samples);

    // Setting a parameter replaces its leaf, so read every analytic value first.
    std::vector<double> analytic(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) analytic[k] = grads.of(params[coords[k].first])[coords[k].second];

    auto eval = [&loss]() {
        NoGradGuard guard;
        const double v = loss().item();
        if (!std::isfinite(v)) throw NumericError("finite_diff_check_params: non-finite loss");
        return v;
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        const auto [p, i] = coords[k];
        std::vector<double> base(params[p].values().begin(), params[p].values().end());
        std::vector<double> v = base;
        v[i] = base[i] + h;
        params.set(p, v);
        const double fp = eval();
        v[i] = base[i] - h;
        params.set(p, v);
        const double fm = eval();
        params.set(p, base);
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

} // namespace lfrain
