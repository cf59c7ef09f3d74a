#include "lfrain/errors.hpp"
#include "lfrain/gp/gp.hpp"
#include "lfrain/pipeline/commands.hpp"
#include "lfrain/util/kv.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace lfrain;

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    return os;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Light-field deraining: synthesis, staged training, inference and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key = value run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed override");

    auto* synth = app.add_subcommand("synth", "render synthetic rainy light fields");
    std::size_t count = 4, first = 0;
    std::string synth_out;
    bool unlabelled = false;
    synth->add_option("--count", count);
    synth->add_option("--first", first, "index of the first scene");
    synth->add_option("--out", synth_out)->required();
    synth->add_flag("--unlabelled", unlabelled, "write only input views (real-domain stand-in)");

    auto* train = app.add_subcommand("train", "staged training with checkpoints");
    TrainRequest req;
    std::string data_dir, real_dir, ckpt_dir, stage;
    std::uint64_t stop_after = 0;
    train->add_option("--data", data_dir);
    train->add_option("--real", real_dir);
    train->add_option("--checkpoint-dir", ckpt_dir);
    train->add_flag("--resume", req.resume);
    auto* stop_opt = train->add_option("--stop-after", stop_after, "last global step (exclusive)");
    auto* stage_opt = train->add_option("--stage", stage)->check(CLI::IsMember({"dernet", "stage1", "stage2", "joint"}));
    stage_opt->excludes("--resume");

    auto* derain = app.add_subcommand("derain", "restore one scene with a trained checkpoint");
    std::string ckpt, scene, derain_out;
    derain->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
    derain->add_option("--scene", scene)->required()->check(CLI::ExistingDirectory);
    derain->add_option("--out", derain_out)->required();

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM of restored views against ground truth");
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string eval_out;
    eval->add_option("--pair", pairs, "RESTORED_DIR TRUTH_DIR")->expected(0, -1);
    eval->add_option("--out", eval_out, "CSV path (default stdout)");

    auto* ablate = app.add_subcommand("ablate", "train and score ablation variants");
    std::string which = "conv", ablate_out;
    ablate->add_option("--which", which)->check(CLI::IsMember({"conv", "msgp", "disc", "all"}));
    ablate->add_option("--out", ablate_out, "CSV path (default stdout)");

    auto* gpcheck = app.add_subcommand("gp-check", "compare the GP solver against the dense-inverse reference");
    std::size_t instances = 100;
    gpcheck->add_option("--instances", instances);

    auto* show = app.add_subcommand("config", "print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        if (!real_dir.empty()) cfg.real_dir = real_dir;
        if (!ckpt_dir.empty()) cfg.checkpoint_dir = ckpt_dir;

        if (synth->parsed()) {
            cmd_synth(cfg, count, synth_out, unlabelled, first);
        } else if (train->parsed()) {
            if (stop_opt->count()) req.stop_after = stop_after;
            if (stage_opt->count()) req.only_stage = stage;
            cmd_train(cfg, req, std::cerr);
        } else if (derain->parsed()) {
            cmd_derain(cfg, ckpt, scene, derain_out);
        } else if (eval->parsed()) {
            std::vector<DirPair> dp(pairs.begin(), pairs.end());
            if (eval_out.empty()) {
                cmd_eval(dp, std::cout);
            } else {
                auto os = open_csv(eval_out);
                cmd_eval(dp, os);
            }
        } else if (ablate->parsed()) {
            if (ablate_out.empty()) {
                cmd_ablate(cfg, which, std::cout, std::cerr);
            } else {
                auto os = open_csv(ablate_out);
                cmd_ablate(cfg, which, os, std::cerr);
            }
        } else if (gpcheck->parsed()) {
            const GpCheckReport r = gp_check(instances, cfg.seed);
            std::cout << "instances " << r.instances << "\nmax_mean_dev " << format_double(r.max_mean_dev)
                      << "\nmax_var_dev " << format_double(r.max_var_dev) << "\nworked_mean "
                      << format_double(r.worked_mean[0]) << ' ' << format_double(r.worked_mean[1])
                      << "\nworked_var " << format_double(r.worked_var) << '\n';
            if (r.max_mean_dev > 1e-8 || r.max_var_dev > 1e-8) throw NumericError("GP solver deviates from reference");
        } else if (show->parsed()) {
            cfg.validate();
            std::cout << serialize(cfg);
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
