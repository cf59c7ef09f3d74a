#pragma once

#include "lfrain/pipeline/config.hpp"
#include "lfrain/tensor/params.hpp"
#include "lfrain/train/trainers.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lfrain {

/// A stage occupies global steps [begin, end).
struct StagePlan {
    std::string name;
    std::uint64_t begin = 0, end = 0;
};

/// Every network, optimizer and feature bank of one training run, driven by
/// a global step counter across the stages dernet -> stage1 -> stage2 ->
/// joint. stage2 is empty without real data or with msgp = off.
class Pipeline {
public:
    Pipeline(const RunConfig& cfg, std::vector<TrainScene> train, std::vector<TrainScene> real);

    const std::vector<StagePlan>& plan() const { return plan_; }
    const StagePlan& stage(const std::string& name) const;
    std::uint64_t total_steps() const { return plan_.back().end; }

    using StageEnd = std::function<void(const StagePlan&, std::uint64_t step)>;
    /// Runs global steps [from, to). `on_stage_end` fires after the last step
    /// of each stage that finishes inside the range.
    void run(std::uint64_t from, std::uint64_t to, const LossSink& sink, const StageEnd& on_stage_end = {});

    /// Parameters, optimizer moments and the step counter. Banks are saved
    /// separately with save_banks.
    NamedTensors export_state(std::uint64_t step) const;
    /// Returns the stored step. DERNet is frozen again if that step lies past
    /// its stage.
    std::uint64_t import_state(const NamedTensors& tensors);

    FeatureBanks& banks() { return banks_; }
    const FeatureBanks& banks() const { return banks_; }
    const Mgpdnet& mgpdnet() const { return *mgpdnet_; }
    const Dernet& dernet() const { return *dernet_; }
    const Rnnat& rnnat() const { return *rnnat_; }
    Dernet& dernet() { return *dernet_; }

private:
    void ensure_frozen();

    RunConfig cfg_;
    std::vector<TrainScene> train_, real_;
    std::vector<StagePlan> plan_;
    std::unique_ptr<Mgpdnet> mgpdnet_;
    std::unique_ptr<Dernet> dernet_;
    std::unique_ptr<Rnnat> rnnat_;
    std::unique_ptr<Discriminator> disc_global_, disc_local_;
    FeatureExtractor phi_;
    Adam adam_dernet_, adam_stage1_, adam_stage2_, adam_gen_, adam_disc_;
    FeatureBanks banks_;
    std::unique_ptr<PatchSampler> s_dernet_, s_stage1_, s_stage2_, s_joint_, s_joint_real_;
};

/// Full-frame inference of trained models on one scene stack.
Derained derain_stack(const RunConfig& cfg, const Mgpdnet& mgpdnet, const Dernet& dernet, const Rnnat& rnnat,
                      const Tensor& rainy, double beta);

} // namespace lfrain
