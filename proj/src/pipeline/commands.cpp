#include "lfrain/pipeline/commands.hpp"

#include "lfrain/errors.hpp"
#include "lfrain/lightfield/io.hpp"
#include "lfrain/pipeline/pipeline.hpp"
#include "lfrain/tensor/checkpoint.hpp"
#include "lfrain/tensor/ops.hpp"
#include "lfrain/tensor/random.hpp"
#include "lfrain/util/kv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lfrain {

namespace fs = std::filesystem;

namespace {

std::string scene_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03zu", index);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw FormatError("cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(path, mode);
    if (!os) throw FormatError("cannot write " + path.string());
    return os;
}

} // namespace

void cmd_synth(const RunConfig& cfg, std::size_t count, const fs::path& out, bool unlabelled, std::size_t first) {
    cfg.validate();
    ensure_dir(out);
    const std::uint64_t master = split_seed(cfg.synth.seed, cfg.seed);
    std::ostringstream manifest;
    for (std::size_t i = first; i < first + count; ++i) {
        SynthParams p = cfg.synth;
        p.seed = split_seed(master, 2 * i);
        const std::uint64_t source = split_seed(master, 2 * i + 1);
        const LightField clean = procedural_clean(source, cfg.rows, cfg.cols, cfg.height, cfg.width);
        const LightField depth = procedural_depth(source, cfg.rows, cfg.cols, cfg.height, cfg.width);
        const RainScene scene = synth_scene(p, clean, depth);
        const fs::path dir = out / scene_name(i);
        ensure_dir(dir);
        if (unlabelled) {
            write_lfi(scene.rainy, dir / "input");
            open_out(dir / "manifest.txt") << to_manifest(p);
        } else {
            write_scene(scene, dir);
        }
        manifest << scene_name(i) << '\n';
    }
    open_out(out / "manifest.txt") << manifest.str();
}

namespace {

struct LossLog {
    fs::path path;
    std::ofstream os;

    // Keeps the header and the rows before `step` of an earlier run.
    void open(bool resume, std::uint64_t step) {
        std::vector<std::string> keep;
        if (resume && fs::exists(path)) {
            std::ifstream in(path);
            std::string line;
            bool header = true;
            while (std::getline(in, line)) {
                if (header) {
                    header = false;
                    continue;
                }
                const auto comma = line.find(',');
                if (comma != std::string::npos && std::stoull(line.substr(0, comma)) < step) keep.push_back(line);
            }
        }
        os = open_out(path, std::ios::out | std::ios::trunc);
        write_loss_header(os);
        for (const auto& l : keep) os << l << '\n';
        os.flush();
    }
};

void save_snapshot(const Pipeline& p, std::uint64_t step, const fs::path& dir, const std::string& stem) {
    save_tensors(dir / (stem + ".bin"), p.export_state(step));
    save_banks(dir / (stem + ".banks.bin"), p.banks());
}

std::uint64_t load_snapshot(Pipeline& p, const fs::path& dir, const std::string& stem, std::size_t capacity) {
    const fs::path state = dir / (stem + ".bin"), banks = dir / (stem + ".banks.bin");
    const std::uint64_t step = p.import_state(load_tensors(state));
    auto loaded = load_banks(banks, capacity);
    if (loaded.size() != 3) throw FormatError(banks.string() + " must hold three banks");
    for (std::size_t k = 0; k < 3; ++k) {
        if (loaded[k].dim() != p.banks()[k].dim()) throw ContractError(banks.string() + " has the wrong feature size");
        p.banks()[k] = std::move(loaded[k]);
    }
    return step;
}

std::vector<TrainScene> load_real(const RunConfig& cfg) {
    if (cfg.real_dir.empty()) return {};
    return load_dataset(cfg.real_dir);
}

} // namespace

void cmd_train(const RunConfig& cfg, const TrainRequest& req, std::ostream& msg) {
    cfg.validate();
    if (!fs::is_directory(cfg.data_dir)) throw ContractError("training data directory " + cfg.data_dir + " is missing");
    Pipeline p(cfg, load_dataset(cfg.data_dir), load_real(cfg));
    const fs::path dir = cfg.checkpoint_dir;
    ensure_dir(dir);

    std::uint64_t from = 0, to = p.total_steps();
    if (req.only_stage) {
        const StagePlan& st = p.stage(*req.only_stage);
        if (st.begin > 0) {
            // The newest non-empty stage before this one holds the starting state.
            std::string prev;
            for (const auto& q : p.plan())
                if (q.end <= st.begin && q.end > q.begin) prev = q.name;
            if (!prev.empty()) {
                if (!fs::exists(dir / (prev + ".bin"))) {
                    throw ContractError(st.name + " training needs the " + prev + " checkpoint " +
                                        (dir / (prev + ".bin")).string() + "; run that stage first");
                }
                load_snapshot(p, dir, prev, cfg.gp.bank_capacity);
            }
        }
        from = st.begin;
        to = st.end;
    } else if (req.resume) {
        if (!fs::exists(dir / "state.bin")) throw ContractError("nothing to resume in " + dir.string());
        from = load_snapshot(p, dir, "state", cfg.gp.bank_capacity);
    }
    if (req.stop_after) to = std::min<std::uint64_t>(to, std::max(from, *req.stop_after));

    LossLog log{dir / "loss.csv", {}};
    log.open(req.resume || req.only_stage.has_value(), from);
    const std::uint64_t every = cfg.checkpoint_every;
    auto sink = [&](const LossRow& r) {
        write_loss_row(log.os, r);
        log.os.flush();
        if (every && (r.step + 1) % every == 0 && r.step + 1 < to) save_snapshot(p, r.step + 1, dir, "state");
    };
    auto stage_end = [&](const StagePlan& st, std::uint64_t step) {
        if (st.end > st.begin) save_snapshot(p, step, dir, st.name);
        msg << st.name << " done at step " << step << '\n';
    };
    for (const auto& st : p.plan()) msg << st.name << " steps [" << st.begin << ", " << st.end << ")\n";
    p.run(from, to, sink, stage_end);
    save_snapshot(p, to, dir, "state");
    msg << "trained steps [" << from << ", " << to << ") of " << p.total_steps() << '\n';
}

void cmd_derain(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& scene, const fs::path& out) {
    cfg.validate();
    const NamedTensors tensors = load_tensors(checkpoint);
    Mgpdnet mgpdnet(cfg.mgpdnet_config());
    Dernet dernet(cfg.dernet_config());
    Rnnat rnnat(cfg.rnnat_config());
    mgpdnet.params().import_tensors(tensors);
    dernet.params().import_tensors(tensors);
    rnnat.params().import_tensors(tensors);
    dernet.freeze();

    const SceneData data = read_scene(scene);
    const Tensor rainy = lightfield_to_stack(data.rainy);
    const Derained d = derain_stack(cfg, mgpdnet, dernet, rnnat, rainy, data.params.beta);

    auto dv = d.depth.values();
    const double depth_scale = std::max(1.0, *std::max_element(dv.begin(), dv.end()));
    ensure_dir(out);
    write_lfi(stack_to_lightfield(d.restored), out / "restored");
    write_lfi(stack_to_lightfield(d.rain), out / "rain");
    write_lfi(stack_to_lightfield(scale(d.depth, 1.0 / depth_scale)), out / "depth");
    write_lfi(stack_to_lightfield(d.fog), out / "fog");
    KeyValues kv;
    kv.set("depth_scale", depth_scale);
    kv.set("beta", data.params.beta);
    open_out(out / "manifest.txt") << kv.serialize();
}

namespace {

std::string pair_scene(const DirPair& p) {
    fs::path truth = p.second;
    if (truth.filename().empty()) truth = truth.parent_path();
    if (truth.filename() == "gt" || truth.filename() == "input") return truth.parent_path().filename().string();
    return truth.filename().string();
}

void check_aligned(const LightField& a, const LightField& b, const DirPair& p) {
    for (std::size_t u = 0; u < std::max(a.rows(), b.rows()); ++u)
        for (std::size_t v = 0; v < std::max(a.cols(), b.cols()); ++v) {
            const bool in_a = u < a.rows() && v < a.cols(), in_b = u < b.rows() && v < b.cols();
            const std::string view = "view_" + std::to_string(u) + "_" + std::to_string(v);
            if (in_a != in_b) {
                throw ContractError(view + " is present in " + (in_a ? p.first : p.second).string() + " but not in " +
                                    (in_a ? p.second : p.first).string());
            }
        }
    if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("view_0_0 of " + p.first.string() + " and " + p.second.string() + " differ in size");
    }
}

} // namespace

std::vector<ViewMetric> cmd_eval(const std::vector<DirPair>& pairs, std::ostream& csv) {
    if (pairs.empty()) throw ContractError("eval needs at least one (restored, truth) directory pair");
    std::vector<ViewMetric> rows;
    std::vector<std::size_t> centers;
    for (const DirPair& p : pairs) {
        const LightField a = read_lfi(p.first), b = read_lfi(p.second);
        check_aligned(a, b, p);
        auto r = evaluate_views(pair_scene(p), a, b);
        centers.push_back(rows.size() + (b.rows() / 2) * b.cols() + b.cols() / 2);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    rows = with_summary(std::move(rows), centers);
    write_metrics_csv(csv, rows);
    return rows;
}

std::vector<AblationVariant> ablation_variants(const std::string& which) {
    std::vector<AblationVariant> out;
    const bool all = which == "all";
    if (all || which == "conv") {
        for (ConvMode m : {ConvMode::d2, ConvMode::d3, ConvMode::d4}) {
            out.push_back({"conv_" + to_string(m), m, MsgpMode::msgp, true});
        }
    }
    if (all || which == "msgp") {
        for (MsgpMode m : {MsgpMode::off, MsgpMode::mgp, MsgpMode::msgp}) {
            out.push_back({"msgp_" + to_string(m), ConvMode::d4, m, true});
        }
    }
    if (all || which == "disc") {
        out.push_back({"local_disc_off", ConvMode::d4, MsgpMode::msgp, false});
        out.push_back({"local_disc_on", ConvMode::d4, MsgpMode::msgp, true});
    }
    if (out.empty()) throw FormatError("ablation set must be conv, msgp, disc or all, got '" + which + "'");
    return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<AblationVariant>& variants,
                                      const std::vector<TrainScene>& train, const std::vector<TrainScene>& real,
                                      const std::vector<TrainScene>& test, std::ostream* progress) {
    if (test.empty()) throw ContractError("ablation needs at least one labelled test scene");
    std::vector<AblationRow> rows;
    for (const AblationVariant& v : variants) {
        RunConfig c = cfg;
        c.conv_mode = v.conv_mode;
        c.msgp = v.msgp;
        c.local_disc = v.local_disc;
        Pipeline p(c, train, real);
        p.run(0, p.total_steps(), {});
        double ps = 0.0, ss = 0.0;
        for (const TrainScene& t : test) {
            if (!t.clean.defined()) throw ContractError("test scene " + t.name + " has no ground truth");
            const Derained d = derain_stack(c, p.mgpdnet(), p.dernet(), p.rnnat(), t.rainy, t.beta);
            double sp = 0.0, sv = 0.0;
            const auto m = evaluate_views(t.name, stack_to_lightfield(d.restored), stack_to_lightfield(t.clean));
            for (const auto& r : m) {
                sp += r.psnr_db;
                sv += r.ssim;
            }
            ps += sp / static_cast<double>(m.size());
            ss += sv / static_cast<double>(m.size());
        }
        rows.push_back({v, ps / static_cast<double>(test.size()), ss / static_cast<double>(test.size())});
        if (progress) *progress << v.name << ": psnr " << format_double(rows.back().psnr_db) << '\n';
    }
    return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "variant,conv_mode,msgp,local_disc,psnr_db,ssim\n";
    for (const auto& r : rows) {
        os << r.variant.name << ',' << to_string(r.variant.conv_mode) << ',' << to_string(r.variant.msgp) << ','
           << (r.variant.local_disc ? "on" : "off") << ',' << format_double(r.psnr_db) << ','
           << format_double(r.ssim) << '\n';
    }
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::string& which, std::ostream& csv,
                                    std::ostream& msg) {
    cfg.validate();
    auto rows = run_ablation(cfg, ablation_variants(which), load_dataset(cfg.data_dir), load_real(cfg),
                             load_dataset(cfg.test_dir), &msg);
    write_ablation_csv(csv, rows);
    return rows;
}

} // namespace lfrain
