#include "lfrain/pipeline/pipeline.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/tensor/checkpoint.hpp"
#include "lfrain/tensor/random.hpp"

namespace lfrain {

namespace {

std::size_t view_count(const std::vector<TrainScene>& scenes) {
    return scenes.front().rows() * scenes.front().cols();
}

void check_views(const std::vector<TrainScene>& scenes, std::size_t views, const char* what) {
    for (const auto& s : scenes) {
        if (s.rows() * s.cols() != views) {
            throw ContractError(std::string(what) + " scene " + s.name + " has a different angular resolution");
        }
    }
}

} // namespace

Pipeline::Pipeline(const RunConfig& cfg, std::vector<TrainScene> train, std::vector<TrainScene> real)
    : cfg_(cfg), train_(std::move(train)), real_(std::move(real)) {
    cfg_.validate();
    if (train_.empty()) throw ContractError("training needs at least one synthetic scene");
    for (const auto& s : train_) {
        if (!s.labelled()) throw ContractError("training scene " + s.name + " lacks gt, rain or depth layers");
    }
    const std::size_t views = view_count(train_);
    check_views(train_, views, "training");
    check_views(real_, views, "real");

    const std::uint64_t n = train_.size();
    const bool stage2 = !real_.empty() && cfg_.msgp != MsgpMode::off;
    std::uint64_t at = 0;
    auto add = [&](const char* name, std::uint64_t steps) {
        plan_.push_back(StagePlan{name, at, at + steps});
        at += steps;
    };
    add("dernet", cfg_.dernet_epochs * n);
    add("stage1", cfg_.stage1_epochs * n);
    add("stage2", stage2 ? cfg_.stage2_epochs * real_.size() : 0);
    add("joint", cfg_.joint_epochs * n);

    mgpdnet_ = std::make_unique<Mgpdnet>(cfg_.mgpdnet_config());
    dernet_ = std::make_unique<Dernet>(cfg_.dernet_config());
    rnnat_ = std::make_unique<Rnnat>(cfg_.rnnat_config());
    disc_global_ = std::make_unique<Discriminator>("disc_global", views, cfg_.disc_width, cfg_.seed);
    disc_local_ = std::make_unique<Discriminator>("disc_local", views, cfg_.disc_width, cfg_.seed);
    for (Adam* a : {&adam_dernet_, &adam_stage1_, &adam_stage2_, &adam_gen_, &adam_disc_}) a->set_lr(cfg_.lr);
    banks_ = make_banks(cfg_.patch, cfg_.gp.bank_capacity);

    auto sampler = [&](const std::vector<TrainScene>& scenes, const char* name) {
        return std::make_unique<PatchSampler>(scenes, cfg_.patch, split_seed(cfg_.seed, name));
    };
    s_dernet_ = sampler(train_, "sampler.dernet");
    s_stage1_ = sampler(train_, "sampler.stage1");
    s_joint_ = sampler(train_, "sampler.joint");
    if (!real_.empty()) {
        s_stage2_ = sampler(real_, "sampler.stage2");
        s_joint_real_ = sampler(real_, "sampler.joint.real");
    }
}

const StagePlan& Pipeline::stage(const std::string& name) const {
    for (const auto& p : plan_)
        if (p.name == name) return p;
    throw ContractError("unknown training stage '" + name + "'");
}

void Pipeline::ensure_frozen() {
    if (!dernet_->frozen()) dernet_->freeze();
}

void Pipeline::run(std::uint64_t from, std::uint64_t to, const LossSink& sink, const StageEnd& on_stage_end) {
    if (to > total_steps() || from > to) throw ContractError("training step range outside the plan");
    Schedule sched{cfg_.lr, cfg_.decay_every, cfg_.decay_factor};
    Stage2Options s2{cfg_.gp, GpLossWeights{cfg_.loss.lambda_gp, cfg_.loss.lambda_p_real}, cfg_.msgp, cfg_.omega};
    JointOptions jo;
    jo.lambda_p = cfg_.loss.lambda_p;
    jo.lambda_pg = cfg_.loss.lambda_pg;
    jo.lambda_gan = cfg_.loss.lambda_gan;
    jo.disc_patches = cfg_.disc_patches;
    jo.disc_patch = cfg_.local_patch();
    jo.literal_gan = cfg_.literal_gan;
    jo.local_disc = cfg_.local_disc;
    jo.seed = split_seed(cfg_.seed, "joint.patches");
    jo.stage2 = s2;

    // Every step is relabelled with its global index before reaching the sink.
    for (const StagePlan& st : plan_) {
        const std::uint64_t a = std::max(from, st.begin), b = std::min(to, st.end);
        if (a >= b) continue;
        const StepRange local{a - st.begin, b - st.begin};
        LossSink relabel = [&](const LossRow& r) {
            LossRow g = r;
            g.step = r.step + st.begin;
            if (sink) sink(g);
        };
        if (st.name == "dernet") {
            train_dernet(*dernet_, adam_dernet_, *s_dernet_, local, sched, relabel);
        } else {
            ensure_frozen();
            if (st.name == "stage1") {
                train_stage1(*mgpdnet_, phi_, adam_stage1_, banks_, *s_stage1_, local, sched, cfg_.loss.lambda_p,
                             relabel);
            } else if (st.name == "stage2") {
                train_stage2(*mgpdnet_, phi_, adam_stage2_, banks_, *s_stage2_, local, sched, s2, relabel);
            } else {
                const bool real = s_joint_real_ && cfg_.msgp != MsgpMode::off;
                train_joint({*mgpdnet_, *dernet_, *rnnat_, *disc_global_, *disc_local_}, phi_, adam_gen_, adam_disc_,
                            *s_joint_, real ? s_joint_real_.get() : nullptr, real ? &banks_ : nullptr, local, sched,
                            jo, relabel);
            }
        }
        if (b == st.end) {
            if (st.name == "dernet") ensure_frozen();
            if (on_stage_end) on_stage_end(st, b);
        }
    }
    if (to >= stage("dernet").end) ensure_frozen();
}

NamedTensors Pipeline::export_state(std::uint64_t step) const {
    NamedTensors out;
    out.emplace_back("progress/step", Tensor::scalar(static_cast<double>(step)));
    for (const ParameterSet* p : {&mgpdnet_->params(), &dernet_->params(), &rnnat_->params(),
                                  &disc_global_->params(), &disc_local_->params()}) {
        auto t = p->export_tensors();
        out.insert(out.end(), t.begin(), t.end());
    }
    const std::pair<const Adam*, const char*> opts[] = {{&adam_dernet_, "adam.dernet/"}, {&adam_stage1_, "adam.stage1/"},
                                                        {&adam_stage2_, "adam.stage2/"}, {&adam_gen_, "adam.gen/"},
                                                        {&adam_disc_, "adam.disc/"}};
    for (const auto& [a, prefix] : opts) {
        auto t = a->export_state(prefix);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

std::uint64_t Pipeline::import_state(const NamedTensors& tensors) {
    const std::uint64_t step = static_cast<std::uint64_t>(find_tensor(tensors, "progress/step").item());
    mgpdnet_->params().import_tensors(tensors);
    dernet_->params().import_tensors(tensors);
    rnnat_->params().import_tensors(tensors);
    disc_global_->params().import_tensors(tensors);
    disc_local_->params().import_tensors(tensors);
    const std::pair<Adam*, const char*> opts[] = {{&adam_dernet_, "adam.dernet/"}, {&adam_stage1_, "adam.stage1/"},
                                                  {&adam_stage2_, "adam.stage2/"}, {&adam_gen_, "adam.gen/"},
                                                  {&adam_disc_, "adam.disc/"}};
    for (const auto& [a, prefix] : opts) a->import_state(tensors, prefix);
    if (step >= stage("dernet").end) ensure_frozen();
    return step;
}

Derained derain_stack(const RunConfig& cfg, const Mgpdnet& mgpdnet, const Dernet& dernet, const Rnnat& rnnat,
                      const Tensor& rainy, double beta) {
    return run_pipeline(mgpdnet, dernet, rnnat, rainy, beta, cfg.tile, cfg.margin);
}

} // namespace lfrain
