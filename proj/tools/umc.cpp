// umc: train, evaluate and ablate unpaired multi-view clustering runs.
#include "umc/app.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <map>

namespace {

using namespace umc;
namespace fs = std::filesystem;

struct ConfigFlags {
    std::optional<std::string> file;
    std::map<std::string, std::string> values;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", file, "JSON config with flat dotted keys")->check(CLI::ExistingFile);
        for (const std::string& key : app::config_keys()) {
            cmd.add_option("--" + key, values[key], "overrides config key '" + key + "'");
        }
    }

    TrainConfig resolve(const CLI::App& cmd) const {
        app::Overrides overrides;
        for (const auto& [key, value] : values) {
            if (cmd.count("--" + key) > 0) overrides.emplace_back(key, value);
        }
        std::optional<fs::path> path;
        if (file) path = *file;
        return app::resolve_config(path, overrides);
    }
};

void print_scores(const std::string& label, const app::json& s) {
    std::printf("%-22s NMI %6.2f  ACC %6.2f  F1 %6.2f  Precision %6.2f\n", label.c_str(),
                100.0 * s["nmi"].get<double>(), 100.0 * s["acc"].get<double>(),
                100.0 * s["f1"].get<double>(), 100.0 * s["precision"].get<double>());
}

void print_metrics(const app::json& m) {
    print_scores("pooled", m["pooled"]);
    for (const auto& v : m["per_view"]) {
        const std::string view = "view " + std::to_string(v["view"].get<int>());
        print_scores(view, v["joint"]);
        if (v.contains("latent_kmeans")) print_scores(view + " latent k-means", v["latent_kmeans"]);
        if (v.contains("original")) print_scores(view + " original", v["original"]);
    }
}

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ConfigError("not a number list: " + text);
        out.push_back(v);
    }
    return out;
}

fs::path run_dir_for(const TrainConfig& c) {
    const std::string name = fs::path(c.dataset).filename().string();
    return app::default_output_root() / (name + "_" + to_string(c.mode) + "_seed" + std::to_string(c.seed));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Unpaired multi-view clustering with reliable-view guidance"};
    cli.set_version_flag("--version", app::kVersion);
    cli.require_subcommand(1);

    auto* train = cli.add_subcommand("train", "train a model and cluster all views");
    ConfigFlags train_flags;
    train_flags.attach(*train);
    std::string train_out;
    train->add_option("--out", train_out, "run directory (default: $UMC_OUTPUT_ROOT/<dataset>_<mode>_seed<seed>)");

    auto* ablate = cli.add_subcommand("ablate", "train every cell of a loss/mode grid");
    ConfigFlags ablate_flags;
    ablate_flags.attach(*ablate);
    std::string grid = "terms";
    std::string ablate_out;
    ablate->add_option("--grid", grid, "terms, weighting, or MODE:terms cells, e.g. RGs:orth+c+kl,RG:none")
        ->capture_default_str();
    ablate->add_option("--out", ablate_out, "output directory (default: $UMC_OUTPUT_ROOT/ablate_<grid>)");

    auto* eval = cli.add_subcommand("eval", "score assignments or latents against a dataset");
    app::EvalRequest request;
    std::string eval_dataset, eval_assignments, eval_latents, eval_out, nmi_norm = "geometric";
    bool raw = false;
    eval->add_option("--dataset", eval_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    auto* assignments_opt = eval->add_option("--assignments", eval_assignments, "view-major cluster ids")
                                ->check(CLI::ExistingFile);
    auto* latents_opt = eval->add_option("--latents", eval_latents, "directory of latents_view<v>.csv")
                            ->check(CLI::ExistingDirectory);
    eval->add_option("--k", request.k, "cluster count (default: dataset K)");
    eval->add_option("--seed", request.seed, "seed for the K-means runs")->capture_default_str();
    eval->add_option("--nmi", nmi_norm, "NMI normalization")
        ->check(CLI::IsMember({"geometric", "arithmetic"}))
        ->capture_default_str();
    eval->add_flag("--raw", raw, "skip column standardization of the raw features");
    eval->add_option("--out", eval_out, "write metrics JSON here instead of stdout");
    eval->callback([&] {
        if (!*assignments_opt && !*latents_opt) throw CLI::ValidationError("--assignments or --latents is required");
    });

    auto* synth = cli.add_subcommand("synth", "generate a synthetic multi-view dataset");
    SynthSpec spec;
    std::optional<std::uint64_t> synth_seed, unpair_seed;
    std::string dims_text, noise_text, synth_out;
    bool paired = false;
    synth->add_option("--k", spec.clusters, "clusters")->capture_default_str();
    synth->add_option("--views", spec.views, "views")->capture_default_str();
    synth->add_option("--per-cluster", spec.per_cluster, "samples per cluster")->capture_default_str();
    synth->add_option("--latent-dim", spec.latent_dim, "generative dimension (0: K)");
    synth->add_option("--dims", dims_text, "per-view feature widths, comma separated");
    synth->add_option("--noise", noise_text, "per-view noise sigma: one value or one per view");
    synth->add_option("--separation", spec.separation, "distance between cluster means")->capture_default_str();
    synth->add_flag("--nonlinear", spec.nonlinear, "apply tanh after the view map");
    synth->add_option("--seed", synth_seed, "generator seed (required)");
    synth->add_option("--unpair-seed", unpair_seed, "unpairing seed (default: --seed)");
    synth->add_flag("--paired", paired, "keep every sample in every view");
    synth->add_option("--name", spec.name, "dataset name")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* unpair_cmd = cli.add_subcommand("unpair", "split a paired dataset into disjoint views");
    std::string unpair_in, unpair_out;
    std::optional<std::uint64_t> split_seed;
    unpair_cmd->add_option("--in", unpair_in, "paired dataset directory")->required()->check(CLI::ExistingDirectory);
    unpair_cmd->add_option("--seed", split_seed, "unpairing seed (required)");
    unpair_cmd->add_option("--out", unpair_out, "output directory")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? app::exit_ok : app::exit_config;
    }

    try {
        if (*train) {
            const TrainConfig config = train_flags.resolve(*train);
            const fs::path dir = train_out.empty() ? run_dir_for(config) : fs::path(train_out);
            const app::TrainRun run = app::run_train(config, dir);
            print_metrics(run.metrics);
            std::cout << "run directory: " << dir.string() << '\n';
        } else if (*ablate) {
            const TrainConfig base = ablate_flags.resolve(*ablate);
            const auto cells = app::parse_grid(grid);
            const fs::path dir = ablate_out.empty() ? app::default_output_root() / ("ablate_" + grid)
                                                    : fs::path(ablate_out);
            std::cout << app::run_ablate(base, cells, dir);
        } else if (*eval) {
            request.dataset = eval_dataset;
            if (*assignments_opt) request.assignments = eval_assignments;
            if (*latents_opt) request.latents_dir = eval_latents;
            request.standardize = !raw;
            request.norm = nmi_norm == "arithmetic" ? metrics::NmiNormalization::arithmetic
                                                    : metrics::NmiNormalization::geometric;
            const app::json m = app::run_eval(request);
            if (eval_out.empty()) {
                std::cout << m.dump(2) << '\n';
            } else {
                std::ofstream(eval_out) << m.dump(2) << '\n';
                print_metrics(m);
            }
        } else if (*synth) {
            if (!synth_seed) throw ConfigError("synth: --seed is required");
            spec.seed = *synth_seed;
            if (!dims_text.empty()) {
                for (double d : parse_doubles(dims_text)) spec.dims.push_back(static_cast<Index>(d));
            }
            if (!noise_text.empty()) {
                spec.noise = parse_doubles(noise_text);
                if (spec.noise.size() == 1) spec.noise.assign(static_cast<std::size_t>(spec.views), spec.noise[0]);
            }
            const ViewBundle b = app::run_synth(spec, unpair_seed.value_or(*synth_seed), paired, synth_out);
            std::cout << "wrote " << b.view_count() << " views, " << b.total_samples() << " samples to "
                      << synth_out << '\n';
        } else if (*unpair_cmd) {
            if (!split_seed) throw ConfigError("unpair: --seed is required");
            const ViewBundle b = app::run_unpair(unpair_in, *split_seed, unpair_out);
            std::cout << "wrote " << b.view_count() << " views, " << b.total_samples() << " samples to "
                      << unpair_out << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return app::exit_config;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return app::exit_data;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return app::exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return app::exit_failure;
    }
    return app::exit_ok;
}
