#include "lfrain/gp/gp.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/tensor/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lfrain {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

void require_rows(std::span<const double> query, std::span<const double> rows, std::size_t n) {
    if (n == 0) throw ContractError("gp: empty bank selection");
    if (rows.size() != n * query.size()) throw ShapeError("gp: bank rows do not match the query length");
}

// Gram matrix plus noise and the cross-covariance vector.
std::pair<Mat, Vec> system(std::span<const double> query, std::span<const double> rows, std::size_t n,
                           const GpConfig& cfg) {
    require_rows(query, rows, n);
    const std::size_t d = query.size();
    Mat K(n, n);
    Vec k(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto ri = rows.subspan(i * d, d);
        k(static_cast<Eigen::Index>(i)) = kernel_eval(ri, query);
        for (std::size_t j = i; j < n; ++j) {
            const double v = kernel_eval(ri, rows.subspan(j * d, d));
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    K.diagonal().array() += cfg.sigma_eps * cfg.sigma_eps;
    return {std::move(K), std::move(k)};
}

Vec solve(const Mat& K, const Vec& k) {
    Eigen::LLT<Mat> llt(K);
    if (llt.info() != Eigen::Success) throw NumericError("gp: regularized Gram matrix is not positive definite");
    return llt.solve(k);
}

std::vector<double> combine(const Vec& w, std::span<const double> rows, std::size_t d) {
    std::vector<double> out(d, 0.0);
    for (Eigen::Index i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += w(i) * rows[static_cast<std::size_t>(i) * d + j];
    return out;
}

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

bool read_u64(std::istream& is, std::uint64_t& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return static_cast<std::size_t>(is.gcount()) == sizeof v;
}

} // namespace

void GpConfig::validate() const {
    if (!(sigma_eps > 0.0)) throw ContractError("gp sigma_eps must be positive");
    if (n_near == 0 || n_far == 0) throw ContractError("gp bank selection sizes must be at least 1");
    if (bank_capacity < std::max(n_near, n_far)) throw ContractError("gp bank capacity is below the selection size");
    if (!(var_floor > 0.0 && var_floor < 0.5)) throw ContractError("gp variance floor must lie in (0, 0.5)");
}

double kernel_eval(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("kernel_eval: length mismatch");
    const double nx = norm(x), ny = norm(y);
    if (nx == 0.0 || ny == 0.0) throw DomainError("kernel_eval: zero-norm vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return dot / (nx * ny);
}

FeatureBank::FeatureBank(std::size_t dim, std::size_t capacity) : dim_(dim), capacity_(capacity) {
    if (dim == 0 || capacity == 0) throw ContractError("feature bank needs positive dimension and capacity");
}

void FeatureBank::append(std::span<const double> row) {
    if (row.size() != dim_) {
        throw ShapeError("feature bank expects rows of length " + std::to_string(dim_) + ", got " +
                         std::to_string(row.size()));
    }
    if (size() == capacity_) rows_.erase(rows_.begin(), rows_.begin() + static_cast<std::ptrdiff_t>(dim_));
    rows_.insert(rows_.end(), row.begin(), row.end());
}

std::span<const double> FeatureBank::row(std::size_t i) const {
    if (i >= size()) throw BoundsError("feature bank row out of range");
    return std::span<const double>(rows_).subspan(i * dim_, dim_);
}

void save_banks(const std::filesystem::path& path, std::span<const FeatureBank> banks) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write feature bank " + path.string());
    for (const FeatureBank& b : banks) {
        write_u64(os, b.dim());
        write_u64(os, b.size());
        os.write(reinterpret_cast<const char*>(b.data().data()),
                 static_cast<std::streamsize>(b.data().size() * sizeof(double)));
    }
    if (!os) throw FormatError("failed writing feature bank " + path.string());
}

std::vector<FeatureBank> load_banks(const std::filesystem::path& path, std::size_t capacity) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot read feature bank " + path.string());
    std::vector<FeatureBank> out;
    std::uint64_t dim = 0, count = 0;
    while (read_u64(is, dim)) {
        if (!read_u64(is, count)) throw FormatError("truncated feature bank header in " + path.string());
        if (dim == 0) throw FormatError("feature bank block with zero dimension in " + path.string());
        FeatureBank b(dim, std::max<std::size_t>(capacity, std::max<std::uint64_t>(count, 1)));
        std::vector<double> row(dim);
        for (std::uint64_t i = 0; i < count; ++i) {
            is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(double)));
            if (static_cast<std::size_t>(is.gcount()) != dim * sizeof(double)) {
                throw FormatError("truncated feature bank rows in " + path.string());
            }
            b.append(row);
        }
        out.push_back(std::move(b));
    }
    if (is.gcount() != 0) throw FormatError("trailing bytes in feature bank " + path.string());
    return out;
}

BankSelection select_banks(std::span<const double> query, const FeatureBank& bank, const GpConfig& cfg) {
    const std::size_t n = bank.size();
    if (n < std::max(cfg.n_near, cfg.n_far)) {
        throw ContractError("feature bank holds " + std::to_string(n) + " rows, selection needs " +
                            std::to_string(std::max(cfg.n_near, cfg.n_far)));
    }
    std::vector<double> sim(n);
    for (std::size_t i = 0; i < n; ++i) sim[i] = kernel_eval(query, bank.row(i));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    BankSelection sel;
    std::vector<std::size_t> near = idx;
    std::stable_sort(near.begin(), near.end(), [&sim](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    sel.nearest.assign(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(cfg.n_near));
    std::stable_sort(idx.begin(), idx.end(), [&sim](std::size_t a, std::size_t b) { return sim[a] < sim[b]; });
    sel.farthest.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.n_far));
    return sel;
}

std::vector<double> gather_rows(const FeatureBank& bank, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size() * bank.dim());
    for (std::size_t i : idx) {
        auto r = bank.row(i);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

std::vector<double> gp_mean(std::span<const double> query, std::span<const double> rows, std::size_t n,
                            const GpConfig& cfg) {
    auto [K, k] = system(query, rows, n, cfg);
    return combine(solve(K, k), rows, query.size());
}

double gp_variance(std::span<const double> query, std::span<const double> rows, std::size_t n, const GpConfig& cfg) {
    auto [K, k] = system(query, rows, n, cfg);
    const double prior = kernel_eval(query, query) + cfg.sigma_eps * cfg.sigma_eps;
    return prior - k.dot(solve(K, k));
}

double clamp_variance(double v, const GpConfig& cfg) { return std::clamp(v, cfg.var_floor, 1.0 - cfg.var_floor); }

GpPosterior gp_posterior(std::span<const double> query, const FeatureBank& bank, const BankSelection& sel,
                         const GpConfig& cfg) {
    const std::vector<double> near = gather_rows(bank, sel.nearest);
    const std::vector<double> far = gather_rows(bank, sel.farthest);
    GpPosterior p;
    p.pseudo_gt = gp_mean(query, near, sel.nearest.size(), cfg);
    p.var_near = clamp_variance(gp_variance(query, near, sel.nearest.size(), cfg), cfg);
    p.var_far = clamp_variance(gp_variance(query, far, sel.farthest.size(), cfg), cfg);
    return p;
}

std::vector<double> msgp_guide(std::span<const double> previous, std::span<const double> current, double omega) {
    if (previous.size() != current.size()) throw ShapeError("msgp_guide: length mismatch");
    std::vector<double> out(current.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = omega * previous[i] + (1.0 - omega) * current[i];
    return out;
}

Tensor msgp_guide(const std::vector<double>& previous, const Tensor& current, double omega) {
    if (previous.size() != current.numel()) throw ShapeError("msgp_guide: length mismatch");
    std::vector<double> prev_scaled(previous.size());
    for (std::size_t i = 0; i < previous.size(); ++i) prev_scaled[i] = omega * previous[i];
    return add(Tensor::constant(current.shape(), std::move(prev_scaled)), scale(current, 1.0 - omega));
}

Tensor gp_loss(const Tensor& f, const GpPosterior& post, const FeatureMap& phi, const GpLossWeights& w) {
    if (post.pseudo_gt.size() != f.numel()) throw ShapeError("gp_loss: feature and pseudo target lengths differ");
    if (!(post.var_near > 0.0 && post.var_near < 1.0 && post.var_far > 0.0 && post.var_far < 1.0)) {
        throw DomainError("gp_loss: variances must lie strictly inside (0, 1)");
    }
    const Tensor target = Tensor::constant(f.shape(), post.pseudo_gt);
    const double logs = std::log(post.var_near) + std::log(1.0 - post.var_far);
    Tensor loss = scale(add_scalar(l2_norm(sub(f, target)), logs), w.lambda_gp);
    if (phi && w.lambda_p_real != 0.0) {
        loss = add(loss, scale(mean(square(sub(phi(f), phi(target)))), w.lambda_p_real));
    }
    return loss;
}

Tensor unsup_loss_aggregate(const std::vector<Tensor>& losses) {
    if (losses.empty()) throw DomainError("unsup_loss_aggregate: no losses");
    Tensor acc = losses.front();
    for (std::size_t i = 1; i < losses.size(); ++i) acc = add(acc, losses[i]);
    return scale(acc, 1.0 / static_cast<double>(losses.size()));
}

namespace reference {

namespace {

// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (a[piv * n + col] == 0.0) throw NumericError("gp reference: singular system");
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
            for (std::size_t k = 0; k < n; ++k) {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    return inv;
}

std::pair<std::vector<double>, std::vector<double>> weights(std::span<const double> q, std::span<const double> rows,
                                                            std::size_t n, const GpConfig& cfg) {
    require_rows(q, rows, n);
    const std::size_t d = q.size();
    std::vector<double> K(n * n), k(n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = kernel_eval(rows.subspan(i * d, d), q);
        for (std::size_t j = 0; j < n; ++j) K[i * n + j] = kernel_eval(rows.subspan(i * d, d), rows.subspan(j * d, d));
        K[i * n + i] += cfg.sigma_eps * cfg.sigma_eps;
    }
    const std::vector<double> inv = invert(K, n);
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w[i] += inv[i * n + j] * k[j];
    return {w, k};
}

} // namespace

std::vector<double> gp_mean(std::span<const double> q, std::span<const double> rows, std::size_t n,
                            const GpConfig& cfg) {
    auto [w, k] = weights(q, rows, n, cfg);
    const std::size_t d = q.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += w[i] * rows[i * d + j];
    return out;
}

double gp_variance(std::span<const double> q, std::span<const double> rows, std::size_t n, const GpConfig& cfg) {
    auto [w, k] = weights(q, rows, n, cfg);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) quad += k[i] * w[i];
    return kernel_eval(q, q) + cfg.sigma_eps * cfg.sigma_eps - quad;
}

} // namespace reference

GpCheckReport gp_check(std::size_t instances, std::uint64_t seed) {
    GpCheckReport rep;
    Rng rng(split_seed(seed, "gp-check"));
    std::uniform_int_distribution<std::size_t> dim(1, 16), count(1, 16);
    std::uniform_real_distribution<double> val(-1.0, 1.0), sig(0.05, 1.0);
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t d = dim(rng), n = count(rng);
        GpConfig cfg;
        cfg.sigma_eps = sig(rng);
        std::vector<double> q(d), rows(n * d);
        for (double& x : q) x = val(rng);
        for (double& x : rows) x = val(rng);
        const auto m1 = gp_mean(q, rows, n, cfg), m2 = reference::gp_mean(q, rows, n, cfg);
        for (std::size_t j = 0; j < d; ++j) rep.max_mean_dev = std::max(rep.max_mean_dev, std::abs(m1[j] - m2[j]));
        rep.max_var_dev = std::max(rep.max_var_dev, std::abs(gp_variance(q, rows, n, cfg) -
                                                              reference::gp_variance(q, rows, n, cfg)));
        ++rep.instances;
    }
    GpConfig cfg;
    cfg.sigma_eps = std::sqrt(0.1);
    const double s = 1.0 / std::sqrt(2.0);
    const std::vector<double> q{s, s}, rows{1, 0, 0, 1};
    rep.worked_mean = gp_mean(q, rows, 2, cfg);
    rep.worked_var = gp_variance(q, rows, 2, cfg);
    return rep;
}

} // namespace lfrain
