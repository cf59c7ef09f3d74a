#pragma once

// Independent brute-force reference computations used only by tests. Nothing
// here calls into the library's numerical kernels.

#include "lfrain/tensor/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

inline lfrain::Tensor random_tensor(lfrain::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    auto v = random_values(s.numel(), rng, lo, hi);
    return lfrain::Tensor::constant(std::move(s), std::move(v));
}

/// Unbatched 3D correlation, 6 nested loops over (co, z, y, x) x (ci, taps).
/// x: [Ci, D0, D1, D2], w: [Co, Ci, K0, K1, K2].
inline std::vector<double> conv3d(const std::vector<double>& x, const std::vector<double>& w, long Ci, long Co,
                                  long D0, long D1, long D2, long K0, long K1, long K2) {
    std::vector<double> out(static_cast<std::size_t>(Co * D0 * D1 * D2), 0.0);
    for (long co = 0; co < Co; ++co)
        for (long z = 0; z < D0; ++z)
            for (long y = 0; y < D1; ++y)
                for (long xx = 0; xx < D2; ++xx) {
                    double acc = 0.0;
                    for (long ci = 0; ci < Ci; ++ci)
                        for (long a = 0; a < K0; ++a)
                            for (long b = 0; b < K1; ++b)
                                for (long c = 0; c < K2; ++c) {
                                    long iz = z + a - K0 / 2, iy = y + b - K1 / 2, ix = xx + c - K2 / 2;
                                    if (iz < 0 || iz >= D0 || iy < 0 || iy >= D1 || ix < 0 || ix >= D2) continue;
                                    acc += w[static_cast<std::size_t>((((co * Ci + ci) * K0 + a) * K1 + b) * K2 + c)] *
                                           x[static_cast<std::size_t>(((ci * D0 + iz) * D1 + iy) * D2 + ix)];
                                }
                    out[static_cast<std::size_t>(((co * D0 + z) * D1 + y) * D2 + xx)] = acc;
                }
    return out;
}

/// Direct 4D correlation over (S, V, H, W): x [Ci,S,V,H,W], w [Co,Ci,Ks,Kv,Kh,Kw].
inline std::vector<double> conv4d(const std::vector<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& bias, long Ci, long Co, long S, long V, long H, long W,
                                  long Ks, long Kv, long Kh, long Kw) {
    std::vector<double> out(static_cast<std::size_t>(Co * S * V * H * W), 0.0);
    auto xi = [&](long c, long s, long v, long h, long ww) {
        return static_cast<std::size_t>((((c * S + s) * V + v) * H + h) * W + ww);
    };
    for (long co = 0; co < Co; ++co)
        for (long s = 0; s < S; ++s)
            for (long v = 0; v < V; ++v)
                for (long h = 0; h < H; ++h)
                    for (long ww = 0; ww < W; ++ww) {
                        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
                        for (long ci = 0; ci < Ci; ++ci)
                            for (long a = 0; a < Ks; ++a)
                                for (long b = 0; b < Kv; ++b)
                                    for (long c = 0; c < Kh; ++c)
                                        for (long d = 0; d < Kw; ++d) {
                                            long is = s + a - Ks / 2, iv = v + b - Kv / 2, ih = h + c - Kh / 2,
                                                 iw = ww + d - Kw / 2;
                                            if (is < 0 || is >= S || iv < 0 || iv >= V || ih < 0 || ih >= H ||
                                                iw < 0 || iw >= W)
                                                continue;
                                            const std::size_t wi = static_cast<std::size_t>(
                                                ((((co * Ci + ci) * Ks + a) * Kv + b) * Kh + c) * Kw + d);
                                            acc += w[wi] * x[xi(ci, is, iv, ih, iw)];
                                        }
                        out[static_cast<std::size_t>((((co * S + s) * V + v) * H + h) * W + ww)] = acc;
                    }
    return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Gauss-Jordan inverse with partial pivoting on a dense n x n row-major matrix.
inline std::vector<double> inverse(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(a[col * n + k], a[piv * n + k]);
            std::swap(inv[col * n + k], inv[piv * n + k]);
        }
        const double d = a[col * n + col];
        for (std::size_t k = 0; k < n; ++k) {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < n; ++k) {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    return inv;
}

} // namespace oracle
