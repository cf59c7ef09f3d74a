#pragma once

#include "lfrain/gp/gp.hpp"
#include "lfrain/nets/dernet.hpp"
#include "lfrain/nets/mgpdnet.hpp"
#include "lfrain/nets/rnnat.hpp"
#include "lfrain/tensor/params.hpp"
#include "lfrain/train/data.hpp"

#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace lfrain {

enum class MsgpMode { off, mgp, msgp };
MsgpMode parse_msgp_mode(const std::string& s);
std::string to_string(MsgpMode m);

/// One row of the loss log; columns that do not apply to a stage are empty.
struct LossRow {
    std::uint64_t step = 0;
    std::string stage;
    std::optional<double> ls, lr, lg, lgan, ltotal;
};
using LossSink = std::function<void(const LossRow&)>;

void write_loss_header(std::ostream& os);
void write_loss_row(std::ostream& os, const LossRow& row);

/// Steps [begin, end) of a stage. Each step depends only on its index and the
/// incoming parameter and optimizer state, so a range can be split at any
/// checkpoint and resumed.
struct StepRange {
    std::uint64_t begin = 0, end = 0;
};

struct Schedule {
    double lr = 2e-4;
    std::size_t decay_every = 80;
    double decay_factor = 0.5;
};

/// lr for `step` when every epoch visits each of `scenes` once.
double scheduled_lr(const Schedule& s, std::uint64_t step, std::size_t scenes);

using FeatureBanks = std::array<FeatureBank, 3>;
FeatureBanks make_banks(std::size_t patch, std::size_t capacity);

/// Supervised depth regression on smooth_l1(D' - D), with D' estimated from
/// the ground-truth rain-free input I - alpha R.
void train_dernet(Dernet& net, Adam& opt, const PatchSampler& data, StepRange range, const Schedule& sched,
                  const LossSink& sink);

/// Supervised rain detection on L_s; every forward pass appends the central
/// features of each scale to its bank.
void train_stage1(Mgpdnet& net, const FeatureExtractor& phi, Adam& opt, FeatureBanks& banks,
                  const PatchSampler& data, StepRange range, const Schedule& sched, double lambda_p,
                  const LossSink& sink);

struct Stage2Options {
    GpConfig gp;
    GpLossWeights weights;
    MsgpMode mode = MsgpMode::msgp;
    double omega = 0.5;
};

/// L_r of one unlabelled patch: per-scale GP pseudo targets from the bank,
/// scale k >= 2 guided by the previous scale's target under MsgpMode::msgp.
Tensor unsupervised_loss(const Detection& det, const FeatureExtractor& phi, const FeatureBanks& banks,
                         std::size_t patch, const Stage2Options& opts);

/// Unlabelled training on L_r. The banks are read-only.
void train_stage2(Mgpdnet& net, const FeatureExtractor& phi, Adam& opt, const FeatureBanks& banks,
                  const PatchSampler& real, StepRange range, const Schedule& sched, const Stage2Options& opts,
                  const LossSink& sink);

struct JointModels {
    Mgpdnet& mgpdnet;
    const Dernet& dernet;
    Rnnat& rnnat;
    Discriminator& global;
    Discriminator& local;
};

struct JointOptions {
    double lambda_p = 0.04;
    double lambda_pg = 0.04;
    double lambda_gan = 0.01;
    std::size_t disc_patches = 4;
    /// Side of the square local-discriminator patches.
    std::size_t disc_patch = 8;
    bool literal_gan = false;
    /// Without the local discriminator its loss terms are zero.
    bool local_disc = true;
    std::uint64_t seed = 1;
    /// Real-domain term L_r, active when a real sampler is supplied.
    Stage2Options stage2;
};

/// Alternating updates: discriminators on the GAN losses with Y' held fixed,
/// then MGPDNet and RNNAT on L_total. DERNet must be frozen and its checksum
/// is verified unchanged on exit.
void train_joint(JointModels models, const FeatureExtractor& phi, Adam& gen_opt, Adam& disc_opt,
                 const PatchSampler& data, const PatchSampler* real, const FeatureBanks* banks, StepRange range,
                 const Schedule& sched, const JointOptions& opts, const LossSink& sink);

/// Rain-free estimate of a whole stack: detection, depth, fog, restoration.
struct Derained {
    Tensor rain, depth, fog, restored;
};
/// Runs the networks on overlapping (tile + 2 margin)^2 windows and keeps the
/// central tile x tile part of each; tile = 0 processes the frame in one go.
/// Windows are shifted inward at the borders so every window has the same
/// size. Gradients are not recorded.
Derained run_pipeline(const Mgpdnet& mgpdnet, const Dernet& dernet, const Rnnat& rnnat, const Tensor& rainy,
                      double beta, std::size_t tile = 16, std::size_t margin = 4);

} // namespace lfrain
