#include "lfrain/tensor/ops.hpp"

#include "lfrain/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfrain {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
}

template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
    auto xv = x.values();
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
    auto yv = std::make_shared<std::vector<double>>(y);
    return Tensor::from_op(x.shape(), std::move(y), {x},
                           [x, yv, df](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto xs = x.values();
                               auto& gx = *pg[0];
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xs[i], (*yv)[i]);
                           });
}

// Copies a block-structured view: the tensor is seen as [outer, axis_len, inner].
struct AxisView {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
    if (axis >= s.rank()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + s.str());
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    v.len = s[axis];
    for (std::size_t i = axis + 1; i < s.rank(); ++i) v.inner *= s[i];
    return v;
}

std::vector<double> transpose_values(std::span<const double> src, const Shape& in_shape,
                                     const std::vector<std::size_t>& perm) {
    const std::size_t rank = in_shape.rank();
    const auto in_strides = in_shape.strides();
    std::vector<std::size_t> out_dims(rank), stride_of_out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_dims[i] = in_shape[perm[i]];
        stride_of_out[i] = in_strides[perm[i]];
    }
    std::vector<double> dst(src.size());
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    const std::size_t last = rank - 1;
    for (std::size_t flat = 0; flat < dst.size();) {
        // Innermost axis as a strided copy.
        const std::size_t n = out_dims[last];
        const std::size_t st = stride_of_out[last];
        for (std::size_t j = 0; j < n; ++j) dst[flat + j] = src[offset + j * st];
        flat += n;
        std::size_t axis = last;
        while (axis-- > 0) {
            ++idx[axis];
            offset += stride_of_out[axis];
            if (idx[axis] < out_dims[axis]) break;
            offset -= stride_of_out[axis] * out_dims[axis];
            idx[axis] = 0;
        }
    }
    return dst;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    auto av = a.values(), bv = b.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    return Tensor::from_op(a.shape(), std::move(y), {a, b},
                           [](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               for (auto* p : pg) {
                                   if (!p) continue;
                                   for (std::size_t i = 0; i < g.size(); ++i) (*p)[i] += g[i];
                               }
                           });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    auto av = a.values(), bv = b.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
    return Tensor::from_op(a.shape(), std::move(y), {a, b},
                           [](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               if (pg[0])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                               if (pg[1])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                           });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    auto av = a.values(), bv = b.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    return Tensor::from_op(a.shape(), std::move(y), {a, b},
                           [a, b](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto av = a.values(), bv = b.values();
                               if (pg[0])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
                               if (pg[1])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
                           });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same(a, b, "div");
    auto av = a.values(), bv = b.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (bv[i] == 0.0) throw DomainError("div: division by zero");
        y[i] = av[i] / bv[i];
    }
    return Tensor::from_op(a.shape(), std::move(y), {a, b},
                           [a, b](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto av = a.values(), bv = b.values();
                               if (pg[0])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] / bv[i];
                               if (pg[1])
                                   for (std::size_t i = 0; i < g.size(); ++i)
                                       (*pg[1])[i] -= g[i] * av[i] / (bv[i] * bv[i]);
                           });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
    return unary(
        x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (lo > hi) throw DomainError("clamp: lo > hi");
    return unary(
        x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (!(v > 0.0)) throw DomainError("log of non-positive value");
    }
    return unary(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
        [](double v, double) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        });
}

Tensor abs(const Tensor& x) {
    return unary(
        x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
    return unary(
        x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
    auto xv = x.values();
    double s = 0.0;
    for (double v : xv) s += v;
    return Tensor::from_op(Shape{1}, {s}, {x},
                           [](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               for (double& v : *pg[0]) v += g[0];
                           });
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.numel());
    auto xv = x.values();
    double s = 0.0;
    for (double v : xv) s += v;
    return Tensor::from_op(Shape{1}, {s / n}, {x},
                           [n](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               const double d = g[0] / n;
                               for (double& v : *pg[0]) v += d;
                           });
}

Tensor l2_norm(const Tensor& x) {
    auto xv = x.values();
    double s = 0.0;
    for (double v : xv) s += v * v;
    const double norm = std::sqrt(s);
    return Tensor::from_op(Shape{1}, {norm}, {x},
                           [x, norm](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               // Subgradient 0 at the origin.
                               if (norm == 0.0) return;
                               auto xv = x.values();
                               auto& gx = *pg[0];
                               for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * xv[i] / norm;
                           });
}

Tensor mean_last(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.rank() < 2) throw ShapeError("mean_last needs rank >= 2, got " + s.str());
    const std::size_t n = s[s.rank() - 1];
    const std::size_t rows = x.numel() / n;
    std::vector<std::size_t> dims(s.dims().begin(), s.dims().end() - 1);
    auto xv = x.values();
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += xv[r * n + j];
        y[r] = acc / static_cast<double>(n);
    }
    return Tensor::from_op(Shape(dims), std::move(y), {x},
                           [n, rows](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t r = 0; r < rows; ++r) {
                                   const double d = g[r] / static_cast<double>(n);
                                   for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += d;
                               }
                           });
}

namespace {

// c[m,n] += a[m,k] * b[k,n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,n] += a[k,m]^T * b[k,n]
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[p * m + i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + a.shape().str() + " x " + b.shape().str());
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> y(m * n, 0.0);
    gemm_acc(a.values().data(), b.values().data(), y.data(), m, k, n);
    return Tensor::from_op(Shape{m, n}, std::move(y), {a, b},
                           [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               if (pg[0]) gemm_nt_acc(g.data(), b.values().data(), pg[0]->data(), m, n, k);
                               if (pg[1]) gemm_tn_acc(a.values().data(), g.data(), pg[1]->data(), k, m, n);
                           });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[1]) {
        throw ShapeError("bmm: incompatible shapes " + a.shape().str() + " x " + b.shape().str());
    }
    const std::size_t batch = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
    std::vector<double> y(batch * m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < batch; ++t) gemm_acc(av + t * m * k, bv + t * k * n, y.data() + t * m * n, m, k, n);
    return Tensor::from_op(
        Shape{batch, m, n}, std::move(y), {a, b},
        [a, b, batch, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> pg) {
            const double* av = a.values().data();
            const double* bv = b.values().data();
            if (pg[0]) {
                double* ga = pg[0]->data();
#pragma omp parallel for schedule(static)
                for (std::size_t t = 0; t < batch; ++t)
                    gemm_nt_acc(g.data() + t * m * n, bv + t * k * n, ga + t * m * k, m, n, k);
            }
            if (pg[1]) {
                double* gb = pg[1]->data();
#pragma omp parallel for schedule(static)
                for (std::size_t t = 0; t < batch; ++t)
                    gemm_tn_acc(av + t * m * k, g.data() + t * m * n, gb + t * k * n, k, m, n);
            }
        });
}

Tensor softmax_last(const Tensor& x) {
    const Shape& s = x.shape();
    const std::size_t n = s[s.rank() - 1];
    const std::size_t rows = x.numel() / n;
    auto xv = x.values();
    auto y = std::make_shared<std::vector<double>>(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * n;
        double* out = y->data() + r * n;
        const double mx = *std::max_element(in, in + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::exp(in[j] - mx);
            z += out[j];
        }
        for (std::size_t j = 0; j < n; ++j) out[j] /= z;
    }
    std::vector<double> values = *y;
    return Tensor::from_op(s, std::move(values), {x},
                           [y, n, rows](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t r = 0; r < rows; ++r) {
                                   const double* yr = y->data() + r * n;
                                   const double* gr = g.data() + r * n;
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
                                   for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += yr[j] * (gr[j] - dot);
                               }
                           });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape.numel() != x.numel()) {
        throw ShapeError("reshape: " + x.shape().str() + " -> " + shape.str() + " changes element count");
    }
    std::vector<double> y(x.values().begin(), x.values().end());
    return Tensor::from_op(std::move(shape), std::move(y), {x},
                           [](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                           });
}

Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm) {
    const Shape& s = x.shape();
    if (perm.size() != s.rank()) throw ShapeError("transpose: permutation rank mismatch for " + s.str());
    std::vector<bool> used(perm.size(), false);
    for (std::size_t p : perm) {
        if (p >= perm.size() || used[p]) throw ShapeError("transpose: invalid permutation for " + s.str());
        used[p] = true;
    }
    std::vector<std::size_t> out_dims(s.rank()), inverse(s.rank());
    for (std::size_t i = 0; i < s.rank(); ++i) {
        out_dims[i] = s[perm[i]];
        inverse[perm[i]] = i;
    }
    Shape out_shape(out_dims);
    auto y = transpose_values(x.values(), s, perm);
    return Tensor::from_op(out_shape, std::move(y), {x},
                           [out_shape, inverse](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto back = transpose_values(g, out_shape, inverse);
                               auto& gx = *pg[0];
                               for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
                           });
}

Tensor permute(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
    const std::size_t rank = x.rank();
    if (axis_a >= rank || axis_b >= rank) {
        throw ShapeError("permute: axis out of range for shape " + x.shape().str());
    }
    std::vector<std::size_t> perm(rank);
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[axis_a], perm[axis_b]);
    return transpose(x, perm);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Shape& first = parts.front().shape();
    if (axis >= first.rank()) throw ShapeError("concat: axis out of range for " + first.str());
    std::vector<std::size_t> dims = first.dims();
    std::size_t total = 0;
    for (const Tensor& t : parts) {
        const Shape& s = t.shape();
        if (s.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < s.rank(); ++i) {
            if (i != axis && s[i] != first[i]) {
                throw ShapeError("concat: shape mismatch " + first.str() + " vs " + s.str());
            }
        }
        total += s[axis];
    }
    dims[axis] = total;
    Shape out_shape(dims);
    const AxisView ov = axis_view(out_shape, axis);
    std::vector<double> y(out_shape.numel());
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Tensor& t : parts) {
        offsets.push_back(off);
        const AxisView pv = axis_view(t.shape(), axis);
        auto tv = t.values();
        const std::size_t block = pv.len * pv.inner;
        for (std::size_t o = 0; o < pv.outer; ++o) {
            std::copy_n(tv.data() + o * block, block, y.data() + (o * ov.len + off) * ov.inner);
        }
        off += pv.len;
    }
    std::vector<AxisView> views;
    for (const Tensor& t : parts) views.push_back(axis_view(t.shape(), axis));
    return Tensor::from_op(out_shape, std::move(y), parts,
                           [ov, views, offsets](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               for (std::size_t p = 0; p < pg.size(); ++p) {
                                   if (!pg[p]) continue;
                                   const AxisView& pv = views[p];
                                   const std::size_t block = pv.len * pv.inner;
                                   auto& gp = *pg[p];
                                   for (std::size_t o = 0; o < pv.outer; ++o) {
                                       const double* src = g.data() + (o * ov.len + offsets[p]) * ov.inner;
                                       double* dst = gp.data() + o * block;
                                       for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                               }
                           });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    const AxisView v = axis_view(x.shape(), axis);
    if (begin >= end || end > v.len) {
        throw BoundsError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range on axis " +
                          std::to_string(axis) + " of " + x.shape().str());
    }
    std::vector<std::size_t> dims = x.shape().dims();
    dims[axis] = end - begin;
    const std::size_t len = end - begin;
    auto xv = x.values();
    std::vector<double> y(v.outer * len * v.inner);
    for (std::size_t o = 0; o < v.outer; ++o) {
        std::copy_n(xv.data() + (o * v.len + begin) * v.inner, len * v.inner, y.data() + o * len * v.inner);
    }
    return Tensor::from_op(Shape(dims), std::move(y), {x},
                           [v, begin, len](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t o = 0; o < v.outer; ++o) {
                                   const double* src = g.data() + o * len * v.inner;
                                   double* dst = gx.data() + (o * v.len + begin) * v.inner;
                                   for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
                               }
                           });
}

Tensor pad(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after) {
    const AxisView v = axis_view(x.shape(), axis);
    if (before == 0 && after == 0) return x;
    std::vector<std::size_t> dims = x.shape().dims();
    const std::size_t len = v.len + before + after;
    dims[axis] = len;
    auto xv = x.values();
    std::vector<double> y(v.outer * len * v.inner, 0.0);
    for (std::size_t o = 0; o < v.outer; ++o) {
        std::copy_n(xv.data() + o * v.len * v.inner, v.len * v.inner, y.data() + (o * len + before) * v.inner);
    }
    return Tensor::from_op(Shape(dims), std::move(y), {x},
                           [v, before, len](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t o = 0; o < v.outer; ++o) {
                                   const double* src = g.data() + (o * len + before) * v.inner;
                                   double* dst = gx.data() + o * v.len * v.inner;
                                   for (std::size_t i = 0; i < v.len * v.inner; ++i) dst[i] += src[i];
                               }
                           });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias, std::size_t axis) {
    const AxisView v = axis_view(x.shape(), axis);
    if (bias.numel() != v.len) {
        throw ShapeError("add_channel_bias: bias of " + std::to_string(bias.numel()) + " for axis length " +
                         std::to_string(v.len));
    }
    auto xv = x.values();
    auto bv = bias.values();
    std::vector<double> y(xv.size());
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t c = 0; c < v.len; ++c) {
            const std::size_t base = (o * v.len + c) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) y[base + i] = xv[base + i] + bv[c];
        }
    return Tensor::from_op(x.shape(), std::move(y), {x, bias},
                           [v](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               if (pg[0])
                                   for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                               if (pg[1]) {
                                   auto& gb = *pg[1];
                                   for (std::size_t o = 0; o < v.outer; ++o)
                                       for (std::size_t c = 0; c < v.len; ++c) {
                                           const std::size_t base = (o * v.len + c) * v.inner;
                                           double acc = 0.0;
                                           for (std::size_t i = 0; i < v.inner; ++i) acc += g[base + i];
                                           gb[c] += acc;
                                       }
                               }
                           });
}

namespace {

struct Planes {
    std::size_t count, h, w;
};

Planes planes_of(const Shape& s, const char* op) {
    if (s.rank() < 2) throw ShapeError(std::string(op) + " needs rank >= 2, got " + s.str());
    const std::size_t h = s[s.rank() - 2], w = s[s.rank() - 1];
    return {s.numel() / (h * w), h, w};
}

Shape with_last_two(const Shape& s, std::size_t h, std::size_t w) {
    std::vector<std::size_t> dims = s.dims();
    dims[dims.size() - 2] = h;
    dims[dims.size() - 1] = w;
    return Shape(dims);
}

} // namespace

Tensor avg_pool2(const Tensor& x) {
    const Planes p = planes_of(x.shape(), "avg_pool2");
    if (p.h % 2 || p.w % 2) throw ShapeError("avg_pool2 needs even spatial extents, got " + x.shape().str());
    const std::size_t oh = p.h / 2, ow = p.w / 2;
    auto xv = x.values();
    std::vector<double> y(p.count * oh * ow);
    for (std::size_t c = 0; c < p.count; ++c)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                const double* base = xv.data() + c * p.h * p.w + 2 * i * p.w + 2 * j;
                y[(c * oh + i) * ow + j] = 0.25 * (base[0] + base[1] + base[p.w] + base[p.w + 1]);
            }
    return Tensor::from_op(with_last_two(x.shape(), oh, ow), std::move(y), {x},
                           [p, oh, ow](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t c = 0; c < p.count; ++c)
                                   for (std::size_t i = 0; i < oh; ++i)
                                       for (std::size_t j = 0; j < ow; ++j) {
                                           const double d = 0.25 * g[(c * oh + i) * ow + j];
                                           double* base = gx.data() + c * p.h * p.w + 2 * i * p.w + 2 * j;
                                           base[0] += d;
                                           base[1] += d;
                                           base[p.w] += d;
                                           base[p.w + 1] += d;
                                       }
                           });
}

Tensor upsample_nearest2(const Tensor& x) {
    const Planes p = planes_of(x.shape(), "upsample_nearest2");
    const std::size_t oh = p.h * 2, ow = p.w * 2;
    auto xv = x.values();
    std::vector<double> y(p.count * oh * ow);
    for (std::size_t c = 0; c < p.count; ++c)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) y[(c * oh + i) * ow + j] = xv[(c * p.h + i / 2) * p.w + j / 2];
    return Tensor::from_op(with_last_two(x.shape(), oh, ow), std::move(y), {x},
                           [p, oh, ow](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t c = 0; c < p.count; ++c)
                                   for (std::size_t i = 0; i < oh; ++i)
                                       for (std::size_t j = 0; j < ow; ++j)
                                           gx[(c * p.h + i / 2) * p.w + j / 2] += g[(c * oh + i) * ow + j];
                           });
}

Tensor subsample2(const Tensor& x) {
    const Planes p = planes_of(x.shape(), "subsample2");
    const std::size_t oh = (p.h + 1) / 2, ow = (p.w + 1) / 2;
    auto xv = x.values();
    std::vector<double> y(p.count * oh * ow);
    for (std::size_t c = 0; c < p.count; ++c)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) y[(c * oh + i) * ow + j] = xv[(c * p.h + 2 * i) * p.w + 2 * j];
    return Tensor::from_op(with_last_two(x.shape(), oh, ow), std::move(y), {x},
                           [p, oh, ow](std::span<const double> g, std::span<std::vector<double>* const> pg) {
                               auto& gx = *pg[0];
                               for (std::size_t c = 0; c < p.count; ++c)
                                   for (std::size_t i = 0; i < oh; ++i)
                                       for (std::size_t j = 0; j < ow; ++j)
                                           gx[(c * p.h + 2 * i) * p.w + 2 * j] += g[(c * oh + i) * ow + j];
                           });
}

} // namespace lfrain
