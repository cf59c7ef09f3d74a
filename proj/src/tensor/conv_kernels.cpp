#include "lfrain/tensor/conv_kernels.hpp"

#include "lfrain/errors.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lfrain {

void Conv3dGeometry::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (kernel[a] % 2 == 0) throw ShapeError("conv3d kernel extents must be odd");
        if (extent[a] == 0) throw ShapeError("conv3d extent must be positive");
    }
    if (batch == 0 || in_channels == 0 || out_channels == 0) throw ShapeError("conv3d: empty batch or channels");
}

namespace kernels {

namespace {

using Index = std::ptrdiff_t;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct Dims {
    Index D0, D1, D2, K0, K1, K2, P0, P1, P2, CI, CO, vol, taps;
    explicit Dims(const Conv3dGeometry& g)
        : D0(static_cast<Index>(g.extent[0])), D1(static_cast<Index>(g.extent[1])),
          D2(static_cast<Index>(g.extent[2])), K0(static_cast<Index>(g.kernel[0])),
          K1(static_cast<Index>(g.kernel[1])), K2(static_cast<Index>(g.kernel[2])), P0(K0 / 2), P1(K1 / 2),
          P2(K2 / 2), CI(static_cast<Index>(g.in_channels)), CO(static_cast<Index>(g.out_channels)),
          vol(D0 * D1 * D2), taps(K0 * K1 * K2) {}
};

// col[(ci * taps + tap), position] = in[ci, position + tap - pad]. Only the
// in-bounds entries are written; the padding pattern is the same for every
// batch entry, so the caller zeroes the buffer once and reuses it.
void im2col(const Dims& d, const double* in, double* col) {
    for (Index ci = 0; ci < d.CI; ++ci)
        for (Index a = 0; a < d.K0; ++a)
            for (Index b = 0; b < d.K1; ++b)
                for (Index c = 0; c < d.K2; ++c) {
                    double* row = col + ((ci * d.K0 + a) * d.K1 * d.K2 + b * d.K2 + c) * d.vol;
                    const Index xlo = std::max<Index>(0, d.P2 - c), xhi = std::min<Index>(d.D2, d.D2 + d.P2 - c);
                    const Index zlo = std::max<Index>(0, d.P0 - a), zhi = std::min<Index>(d.D0, d.D0 + d.P0 - a);
                    const Index ylo = std::max<Index>(0, d.P1 - b), yhi = std::min<Index>(d.D1, d.D1 + d.P1 - b);
                    for (Index z = zlo; z < zhi; ++z)
                        for (Index y = ylo; y < yhi; ++y) {
                            const double* src =
                                in + ((ci * d.D0 + z + a - d.P0) * d.D1 + y + b - d.P1) * d.D2 + c - d.P2;
                            double* dst = row + (z * d.D1 + y) * d.D2;
                            for (Index x = xlo; x < xhi; ++x) dst[x] = src[x];
                        }
                }
}

// Scatter-add of a column buffer back onto an input volume.
void col2im_add(const Dims& d, const double* col, double* in) {
    for (Index ci = 0; ci < d.CI; ++ci)
        for (Index a = 0; a < d.K0; ++a)
            for (Index b = 0; b < d.K1; ++b)
                for (Index c = 0; c < d.K2; ++c) {
                    const double* row = col + ((ci * d.K0 + a) * d.K1 * d.K2 + b * d.K2 + c) * d.vol;
                    const Index xlo = std::max<Index>(0, d.P2 - c), xhi = std::min<Index>(d.D2, d.D2 + d.P2 - c);
                    for (Index z = 0; z < d.D0; ++z) {
                        const Index iz = z + a - d.P0;
                        if (iz < 0 || iz >= d.D0) continue;
                        for (Index y = 0; y < d.D1; ++y) {
                            const Index iy = y + b - d.P1;
                            if (iy < 0 || iy >= d.D1) continue;
                            const double* src = row + (z * d.D1 + y) * d.D2;
                            double* dst = in + ((ci * d.D0 + iz) * d.D1 + iy) * d.D2 + c - d.P2;
                            for (Index x = xlo; x < xhi; ++x) dst[x] += src[x];
                        }
                    }
                }
}

} // namespace

void conv3d_forward(const Conv3dGeometry& g, std::span<const double> in, std::span<const double> w,
                    std::span<double> out) {
    const Dims d(g);
    const Index N = static_cast<Index>(g.batch);
    const Index K = d.CI * d.taps;
    const ConstMap W(w.data(), d.CO, K);

#pragma omp parallel
    {
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index n = 0; n < N; ++n) {
            im2col(d, in.data() + n * d.CI * d.vol, col.data());
            MutMap O(out.data() + n * d.CO * d.vol, d.CO, d.vol);
            O.noalias() = W * ConstMap(col.data(), K, d.vol);
        }
    }
}

void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in) {
    const Dims d(g);
    const Index N = static_cast<Index>(g.batch);
    const Index K = d.CI * d.taps;
    const ConstMap W(w.data(), d.CO, K);

#pragma omp parallel
    {
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index n = 0; n < N; ++n) {
            MutMap C(col.data(), K, d.vol);
            C.noalias() = W.transpose() * ConstMap(grad_out.data() + n * d.CO * d.vol, d.CO, d.vol);
            col2im_add(d, col.data(), grad_in.data() + n * d.CI * d.vol);
        }
    }
}

void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_w) {
    const Dims d(g);
    const Index N = static_cast<Index>(g.batch);
    const Index K = d.CI * d.taps;
    // Per-entry partials reduced in batch order keep the sum independent of
    // the thread count.
    std::vector<double> partial(static_cast<std::size_t>(N * d.CO * K));

#pragma omp parallel
    {
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index n = 0; n < N; ++n) {
            im2col(d, in.data() + n * d.CI * d.vol, col.data());
            MutMap P(partial.data() + n * d.CO * K, d.CO, K);
            P.noalias() = ConstMap(grad_out.data() + n * d.CO * d.vol, d.CO, d.vol) *
                          ConstMap(col.data(), K, d.vol).transpose();
        }
    }
    const std::size_t wsize = static_cast<std::size_t>(d.CO * K);
    for (Index n = 0; n < N; ++n) {
        const double* p = partial.data() + static_cast<std::size_t>(n) * wsize;
        for (std::size_t i = 0; i < wsize; ++i) grad_w[i] += p[i];
    }
}

namespace {

// Rows [tap * CO, (tap + 1) * CO) of a [ks * CO, vol] block belong to output
// unit m - offset(tap).
Index unit_source(Index n, Index tap, Index ks, Index units) {
    const Index m = n + tap - ks / 2;
    return (m < 0 || m >= units) ? -1 : m;
}

} // namespace

void conv4d_forward(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> in,
                    std::span<const double> w, std::span<double> out) {
    const Dims d(g);
    const Index units = static_cast<Index>(g.batch), ks = static_cast<Index>(unit_taps);
    const Index K = d.CI * d.taps;
    const Index block = ks * d.CO * d.vol;
    const ConstMap W(w.data(), ks * d.CO, K);
    std::vector<double> partial(static_cast<std::size_t>(units * block));

#pragma omp parallel
    {
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index m = 0; m < units; ++m) {
            im2col(d, in.data() + m * d.CI * d.vol, col.data());
            MutMap P(partial.data() + m * block, ks * d.CO, d.vol);
            P.noalias() = W * ConstMap(col.data(), K, d.vol);
        }
#pragma omp for schedule(static)
        for (Index n = 0; n < units; ++n) {
            double* o = out.data() + n * d.CO * d.vol;
            std::fill(o, o + d.CO * d.vol, 0.0);
            for (Index tap = 0; tap < ks; ++tap) {
                const Index m = unit_source(n, tap, ks, units);
                if (m < 0) continue;
                const double* p = partial.data() + m * block + tap * d.CO * d.vol;
                for (Index i = 0; i < d.CO * d.vol; ++i) o[i] += p[i];
            }
        }
    }
}

void conv4d_backward_input(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> grad_out,
                           std::span<const double> w, std::span<double> grad_in) {
    const Dims d(g);
    const Index units = static_cast<Index>(g.batch), ks = static_cast<Index>(unit_taps);
    const Index K = d.CI * d.taps;
    const ConstMap W(w.data(), ks * d.CO, K);

#pragma omp parallel
    {
        std::vector<double> gathered(static_cast<std::size_t>(ks * d.CO * d.vol));
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index m = 0; m < units; ++m) {
            for (Index tap = 0; tap < ks; ++tap) {
                // Input unit m feeds output unit m - offset through this tap.
                const Index n = m - (tap - ks / 2);
                double* dst = gathered.data() + tap * d.CO * d.vol;
                if (n < 0 || n >= units) {
                    std::fill(dst, dst + d.CO * d.vol, 0.0);
                } else {
                    const double* src = grad_out.data() + n * d.CO * d.vol;
                    std::copy(src, src + d.CO * d.vol, dst);
                }
            }
            MutMap C(col.data(), K, d.vol);
            C.noalias() = W.transpose() * ConstMap(gathered.data(), ks * d.CO, d.vol);
            col2im_add(d, col.data(), grad_in.data() + m * d.CI * d.vol);
        }
    }
}

void conv4d_backward_weight(const Conv3dGeometry& g, std::size_t unit_taps, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_w) {
    const Dims d(g);
    const Index units = static_cast<Index>(g.batch), ks = static_cast<Index>(unit_taps);
    const Index K = d.CI * d.taps;
    const Index wsize = ks * d.CO * K;
    std::vector<double> partial(static_cast<std::size_t>(units * wsize));

#pragma omp parallel
    {
        std::vector<double> gathered(static_cast<std::size_t>(ks * d.CO * d.vol));
        std::vector<double> col(static_cast<std::size_t>(K * d.vol));
#pragma omp for schedule(static)
        for (Index m = 0; m < units; ++m) {
            for (Index tap = 0; tap < ks; ++tap) {
                const Index n = m - (tap - ks / 2);
                double* dst = gathered.data() + tap * d.CO * d.vol;
                if (n < 0 || n >= units) {
                    std::fill(dst, dst + d.CO * d.vol, 0.0);
                } else {
                    const double* src = grad_out.data() + n * d.CO * d.vol;
                    std::copy(src, src + d.CO * d.vol, dst);
                }
            }
            im2col(d, in.data() + m * d.CI * d.vol, col.data());
            MutMap P(partial.data() + m * wsize, ks * d.CO, K);
            P.noalias() = ConstMap(gathered.data(), ks * d.CO, d.vol) * ConstMap(col.data(), K, d.vol).transpose();
        }
    }
    for (Index m = 0; m < units; ++m) {
        const double* p = partial.data() + m * wsize;
        for (Index i = 0; i < wsize; ++i) grad_w[static_cast<std::size_t>(i)] += p[i];
    }
}

namespace reference {

namespace {

using Index = std::ptrdiff_t;

struct Dims {
    Index D0, D1, D2, K0, K1, K2, N, CI, CO;
    explicit Dims(const Conv3dGeometry& g)
        : D0(static_cast<Index>(g.extent[0])), D1(static_cast<Index>(g.extent[1])),
          D2(static_cast<Index>(g.extent[2])), K0(static_cast<Index>(g.kernel[0])),
          K1(static_cast<Index>(g.kernel[1])), K2(static_cast<Index>(g.kernel[2])),
          N(static_cast<Index>(g.batch)), CI(static_cast<Index>(g.in_channels)),
          CO(static_cast<Index>(g.out_channels)) {}
    Index in_at(Index n, Index c, Index z, Index y, Index x) const { return (((n * CI + c) * D0 + z) * D1 + y) * D2 + x; }
    Index out_at(Index n, Index c, Index z, Index y, Index x) const { return (((n * CO + c) * D0 + z) * D1 + y) * D2 + x; }
    Index w_at(Index o, Index i, Index a, Index b, Index c) const { return (((o * CI + i) * K0 + a) * K1 + b) * K2 + c; }
    bool inside(Index z, Index y, Index x) const { return z >= 0 && z < D0 && y >= 0 && y < D1 && x >= 0 && x < D2; }
};

} // namespace

void conv3d_forward(const Conv3dGeometry& g, std::span<const double> in, std::span<const double> w,
                    std::span<double> out) {
    const Dims d(g);
    for (Index n = 0; n < d.N; ++n)
        for (Index co = 0; co < d.CO; ++co)
            for (Index z = 0; z < d.D0; ++z)
                for (Index y = 0; y < d.D1; ++y)
                    for (Index x = 0; x < d.D2; ++x) {
                        double acc = 0.0;
                        for (Index ci = 0; ci < d.CI; ++ci)
                            for (Index a = 0; a < d.K0; ++a)
                                for (Index b = 0; b < d.K1; ++b)
                                    for (Index c = 0; c < d.K2; ++c) {
                                        const Index iz = z + a - d.K0 / 2, iy = y + b - d.K1 / 2, ix = x + c - d.K2 / 2;
                                        if (!d.inside(iz, iy, ix)) continue;
                                        acc += w[d.w_at(co, ci, a, b, c)] * in[d.in_at(n, ci, iz, iy, ix)];
                                    }
                        out[d.out_at(n, co, z, y, x)] = acc;
                    }
}

void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> w,
                           std::span<double> grad_in) {
    const Dims d(g);
    for (Index n = 0; n < d.N; ++n)
        for (Index co = 0; co < d.CO; ++co)
            for (Index z = 0; z < d.D0; ++z)
                for (Index y = 0; y < d.D1; ++y)
                    for (Index x = 0; x < d.D2; ++x) {
                        const double go = grad_out[d.out_at(n, co, z, y, x)];
                        for (Index ci = 0; ci < d.CI; ++ci)
                            for (Index a = 0; a < d.K0; ++a)
                                for (Index b = 0; b < d.K1; ++b)
                                    for (Index c = 0; c < d.K2; ++c) {
                                        const Index iz = z + a - d.K0 / 2, iy = y + b - d.K1 / 2, ix = x + c - d.K2 / 2;
                                        if (!d.inside(iz, iy, ix)) continue;
                                        grad_in[d.in_at(n, ci, iz, iy, ix)] += go * w[d.w_at(co, ci, a, b, c)];
                                    }
                    }
}

void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_w) {
    const Dims d(g);
    for (Index n = 0; n < d.N; ++n)
        for (Index co = 0; co < d.CO; ++co)
            for (Index z = 0; z < d.D0; ++z)
                for (Index y = 0; y < d.D1; ++y)
                    for (Index x = 0; x < d.D2; ++x) {
                        const double go = grad_out[d.out_at(n, co, z, y, x)];
                        for (Index ci = 0; ci < d.CI; ++ci)
                            for (Index a = 0; a < d.K0; ++a)
                                for (Index b = 0; b < d.K1; ++b)
                                    for (Index c = 0; c < d.K2; ++c) {
                                        const Index iz = z + a - d.K0 / 2, iy = y + b - d.K1 / 2, ix = x + c - d.K2 / 2;
                                        if (!d.inside(iz, iy, ix)) continue;
                                        grad_w[d.w_at(co, ci, a, b, c)] += go * in[d.in_at(n, ci, iz, iy, ix)];
                                    }
                    }
}

} // namespace reference
} // namespace kernels
} // namespace lfrain
