#pragma once

#include "lfrain/lightfield/metrics.hpp"
#include "lfrain/pipeline/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace lfrain {

/// Writes `count` scene bundles scene_<first>.. under `out` plus a manifest
/// listing them one per line. Unlabelled scenes carry only input/ and the
/// synthesis manifest.
void cmd_synth(const RunConfig& cfg, std::size_t count, const std::filesystem::path& out, bool unlabelled = false,
               std::size_t first = 0);

struct TrainRequest {
    bool resume = false;
    /// Stop (and checkpoint) once this global step is reached.
    std::optional<std::uint64_t> stop_after;
    /// Run only this stage, starting from the checkpoint of the stage before it.
    std::optional<std::string> only_stage;
};

/// Staged training with per-stage snapshots, periodic state.bin/banks.bin and
/// loss.csv, all under cfg.checkpoint_dir.
void cmd_train(const RunConfig& cfg, const TrainRequest& req, std::ostream& msg);

/// Writes restored/, rain/, depth/, fog/ and manifest.txt under `out`.
void cmd_derain(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& scene,
                const std::filesystem::path& out);

using DirPair = std::pair<std::filesystem::path, std::filesystem::path>;
/// (restored, truth) LFI directory pairs -> per-view rows plus summary rows.
std::vector<ViewMetric> cmd_eval(const std::vector<DirPair>& pairs, std::ostream& csv);

struct AblationVariant {
    std::string name;
    ConvMode conv_mode = ConvMode::d4;
    MsgpMode msgp = MsgpMode::msgp;
    bool local_disc = true;
};
struct AblationRow {
    AblationVariant variant;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// "conv" (2d, 3d, 4d), "msgp" (off, mgp, msgp), "disc" (local on/off) or "all".
std::vector<AblationVariant> ablation_variants(const std::string& which);

/// Trains each variant from scratch on `train` (+ `real`) and reports mean
/// PSNR/SSIM of all views over the `test` scenes.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<AblationVariant>& variants,
                                      const std::vector<TrainScene>& train, const std::vector<TrainScene>& real,
                                      const std::vector<TrainScene>& test, std::ostream* progress = nullptr);
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::string& which, std::ostream& csv,
                                    std::ostream& msg);

} // namespace lfrain
