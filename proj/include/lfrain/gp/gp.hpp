#pragma once

#include "lfrain/tensor/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lfrain {

struct GpConfig {
    double sigma_eps = 0.1;
    std::size_t n_near = 16;
    std::size_t n_far = 16;
    /// Bank capacity N_l; the oldest rows are dropped beyond it.
    std::size_t bank_capacity = 256;
    double var_floor = 1e-6;

    void validate() const;
    bool operator==(const GpConfig&) const = default;
};

/// Normalized dot product <x, y> / (|x| |y|). DomainError on a zero vector.
double kernel_eval(std::span<const double> x, std::span<const double> y);

/// Append-only store of synthetic feature vectors for one scale.
class FeatureBank {
public:
    FeatureBank() = default;
    FeatureBank(std::size_t dim, std::size_t capacity);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : rows_.size() / dim_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return rows_.empty(); }

    /// Adds a row, evicting the oldest one when full.
    void append(std::span<const double> row);
    std::span<const double> row(std::size_t i) const;
    const std::vector<double>& data() const { return rows_; }

    bool operator==(const FeatureBank& o) const { return dim_ == o.dim_ && rows_ == o.rows_; }

private:
    std::size_t dim_ = 0, capacity_ = 0;
    std::vector<double> rows_;
};

// Bank file: one block per scale, each block is
//   dim (u64 LE), count (u64 LE), count * dim binary64 LE values.
void save_banks(const std::filesystem::path& path, std::span<const FeatureBank> banks);
std::vector<FeatureBank> load_banks(const std::filesystem::path& path, std::size_t capacity);

struct BankSelection {
    std::vector<std::size_t> nearest;
    std::vector<std::size_t> farthest;
};

/// Top n_near and bottom n_far rows by cosine similarity to `query`; ties
/// go to the lower bank index. ContractError if the bank is too small.
BankSelection select_banks(std::span<const double> query, const FeatureBank& bank, const GpConfig& cfg);

struct GpPosterior {
    std::vector<double> pseudo_gt;
    double var_near = 0.0;
    double var_far = 0.0;
};

/// Rows of `bank` listed by `idx`, packed row-major.
std::vector<double> gather_rows(const FeatureBank& bank, const std::vector<std::size_t>& idx);

/// Posterior mean k(F, f)^T (K(F, F) + s^2 I)^-1 F for F given as n rows of
/// length d.
std::vector<double> gp_mean(std::span<const double> query, std::span<const double> rows, std::size_t n,
                            const GpConfig& cfg);
/// Unclamped posterior variance k(f, f) + s^2 - k^T (K + s^2 I)^-1 k.
double gp_variance(std::span<const double> query, std::span<const double> rows, std::size_t n, const GpConfig& cfg);
double clamp_variance(double v, const GpConfig& cfg);

/// Pseudo ground truth from the nearest rows and both clamped variances.
GpPosterior gp_posterior(std::span<const double> query, const FeatureBank& bank, const BankSelection& sel,
                         const GpConfig& cfg);

/// omega * previous + (1 - omega) * current.
std::vector<double> msgp_guide(std::span<const double> previous, std::span<const double> current, double omega);
/// Differentiable in `current`.
Tensor msgp_guide(const std::vector<double>& previous, const Tensor& current, double omega);

struct GpLossWeights {
    double lambda_gp = 0.015;
    double lambda_p_real = 0.04;
};

using FeatureMap = std::function<Tensor(const Tensor&)>;

/// lambda_gp (|f - pseudo| + log var_near + log(1 - var_far))
///   + lambda_p_real * mean((phi(f) - phi(pseudo))^2).
/// `f` is a flat feature tensor; `phi` receives it unchanged and may be
/// empty, which drops the perceptual term.
Tensor gp_loss(const Tensor& f, const GpPosterior& post, const FeatureMap& phi, const GpLossWeights& w);

/// Mean over every patch and scale.
Tensor unsup_loss_aggregate(const std::vector<Tensor>& losses);

namespace reference {

/// Posterior via an explicit Gauss-Jordan inverse; used by the gp-check
/// command to cross-check the Cholesky path.
std::vector<double> gp_mean(std::span<const double> query, std::span<const double> rows, std::size_t n,
                            const GpConfig& cfg);
double gp_variance(std::span<const double> query, std::span<const double> rows, std::size_t n, const GpConfig& cfg);

} // namespace reference

struct GpCheckReport {
    std::size_t instances = 0;
    double max_mean_dev = 0.0;
    double max_var_dev = 0.0;
    std::vector<double> worked_mean;
    double worked_var = 0.0;
};

/// Random instances (d <= 16, banks <= 16) compared against the reference
/// path, plus the 2x2 orthonormal-bank example.
GpCheckReport gp_check(std::size_t instances, std::uint64_t seed);

} // namespace lfrain
