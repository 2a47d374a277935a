#pragma once

#include "umc/data.hpp"
#include "umc/metrics.hpp"
#include "umc/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/// Experiment workflows behind the `umc` command line tool.
namespace umc::app {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "umc 0.1.0";

/// Process exit codes.
enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_data = 3,
    exit_numeric = 4,
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Flat, dotted-key view of every TrainConfig field.
json config_to_json(const TrainConfig& config);
/// Every accepted key, in a stable order.
std::vector<std::string> config_keys();
/// Unknown keys and ill-typed values raise ConfigError. Missing keys keep defaults.
TrainConfig config_from_json(const json& flat);

/// Defaults, then the JSON file (if given), then `--key value` overrides. A
/// relative `dataset` from the file is resolved against the file's directory.
TrainConfig resolve_config(const std::optional<fs::path>& file, const Overrides& overrides);

/// Root for run directories: $UMC_OUTPUT_ROOT, or ./runs.
fs::path default_output_root();

struct TrainRun {
    fs::path run_dir;
    json metrics;
    FitResult fit;
    std::vector<int> assignments;
};

/// fit -> extract_latents -> final_cluster, writing run_manifest.json,
/// train_log.jsonl, latents_view<v>.csv, assignments.csv, metrics.json and
/// checkpoint.bin into `run_dir`.
TrainRun run_train(const TrainConfig& config, const fs::path& run_dir);

/// Pooled scores plus, per view, scores of the pooled assignment restricted to that
/// view ("joint") and of K-means on that view's latents alone ("latent_kmeans").
json score_run(const ViewBundle& data, std::span<const int> assignments,
               std::span<const Matrix> latents, int k, std::uint64_t seed,
               metrics::NmiNormalization norm = metrics::NmiNormalization::geometric);

json scores_json(const metrics::Scores& s);

struct EvalRequest {
    fs::path dataset;
    std::optional<fs::path> assignments;  ///< view-major, one id per line
    std::optional<fs::path> latents_dir;  ///< latents_view<v>.csv files
    int k = 0;                            ///< 0 takes the dataset's K
    std::uint64_t seed = 0;
    bool standardize = true;
    metrics::NmiNormalization norm = metrics::NmiNormalization::geometric;
};

/// Pooled and per-view scores, plus per-view K-means on the raw features as the
/// "original" baseline.
json run_eval(const EvalRequest& request);

struct AblationCell {
    int line = 0;
    Mode mode = Mode::RG;
    bool orth = true;
    bool compactness = true;
    bool alignment = true;
};

/// "terms" (12 loss combinations), "weighting" (weight strategies), or a
/// comma-separated list of MODE:terms cells such as "RGs:orth+c+kl" or "RG:none".
std::vector<AblationCell> parse_grid(const std::string& spec);

/// Runs every cell under `out_dir/cell_<line>` and writes `out_dir/summary.csv`.
/// Returns the CSV text.
std::string run_ablate(const TrainConfig& base, const std::vector<AblationCell>& cells,
                       const fs::path& out_dir);

/// synth_generate + unpair + save. Returns the written bundle.
ViewBundle run_synth(const SynthSpec& spec, std::uint64_t unpair_seed, bool paired,
                     const fs::path& out_dir);

ViewBundle run_unpair(const fs::path& paired_dir, std::uint64_t seed, const fs::path& out_dir);

}  // namespace umc::app
