#include "umc/app.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace umc::app {

namespace {

struct Field {
    const char* key;
    std::function<json(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const json&)> set;
};

[[noreturn]] void bad_type(const std::string& key, const char* expected, const json& v) {
    throw ConfigError("config key '" + key + "' expects " + expected + ", got " + v.dump());
}

bool as_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) bad_type(key, "a boolean", v);
    return v.get<bool>();
}

double as_double(const std::string& key, const json& v) {
    if (!v.is_number()) bad_type(key, "a number", v);
    return v.get<double>();
}

std::int64_t as_int(const std::string& key, const json& v) {
    if (!v.is_number_integer()) bad_type(key, "an integer", v);
    return v.get<std::int64_t>();
}

std::uint64_t as_uint(const std::string& key, const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    bad_type(key, "a non-negative integer", v);
}

std::string as_string(const std::string& key, const json& v) {
    if (!v.is_string()) bad_type(key, "a string", v);
    return v.get<std::string>();
}

template <typename T>
T choice(const std::string& key, const json& v,
         std::initializer_list<std::pair<const char*, T>> options) {
    const std::string s = as_string(key, v);
    std::string names;
    for (const auto& [name, value] : options) {
        if (s == name) return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError("config key '" + key + "': unknown value '" + s + "' (expected " + names + ")");
}

const std::vector<Field>& fields() {
    using C = TrainConfig;
    static const std::vector<Field> table{
        {"dataset", [](const C& c) { return json(c.dataset); },
         [](C& c, const json& v) { c.dataset = as_string("dataset", v); }},
        {"mode", [](const C& c) { return json(to_string(c.mode)); },
         [](C& c, const json& v) {
             try {
                 c.mode = mode_from_string(as_string("mode", v));
             } catch (const ConfigError& e) {
                 throw ConfigError(std::string("config key 'mode': ") + e.what());
             }
         }},
        {"lambda1", [](const C& c) { return json(c.weights.lambda1); },
         [](C& c, const json& v) { c.weights.lambda1 = as_double("lambda1", v); }},
        {"lambda2", [](const C& c) { return json(c.weights.lambda2); },
         [](C& c, const json& v) { c.weights.lambda2 = as_double("lambda2", v); }},
        {"lambda3", [](const C& c) { return json(c.weights.lambda3); },
         [](C& c, const json& v) { c.weights.lambda3 = as_double("lambda3", v); }},
        {"orth", [](const C& c) { return json(c.use_orth); },
         [](C& c, const json& v) { c.use_orth = as_bool("orth", v); }},
        {"compactness", [](const C& c) { return json(c.use_compactness); },
         [](C& c, const json& v) { c.use_compactness = as_bool("compactness", v); }},
        {"alignment", [](const C& c) { return json(c.use_alignment); },
         [](C& c, const json& v) { c.use_alignment = as_bool("alignment", v); }},
        {"epochs", [](const C& c) { return json(c.epochs); },
         [](C& c, const json& v) { c.epochs = static_cast<int>(as_int("epochs", v)); }},
        {"batch_size", [](const C& c) { return json(c.batch_size); },
         [](C& c, const json& v) { c.batch_size = static_cast<int>(as_int("batch_size", v)); }},
        {"latent_dim", [](const C& c) { return json(c.latent_dim); },
         [](C& c, const json& v) { c.latent_dim = as_int("latent_dim", v); }},
        {"hidden", [](const C& c) { return json(c.hidden); },
         [](C& c, const json& v) {
             if (!v.is_array()) bad_type("hidden", "an array of integers", v);
             std::vector<Index> h;
             for (const json& w : v) h.push_back(as_int("hidden", w));
             c.hidden = std::move(h);
         }},
        {"k", [](const C& c) { return json(c.clusters); },
         [](C& c, const json& v) { c.clusters = static_cast<int>(as_int("k", v)); }},
        {"optimizer", [](const C& c) { return json(to_string(c.optimizer.kind)); },
         [](C& c, const json& v) {
             try {
                 c.optimizer.kind = optimizer_from_string(as_string("optimizer", v));
             } catch (const ConfigError& e) {
                 throw ConfigError(std::string("config key 'optimizer': ") + e.what());
             }
         }},
        {"lr", [](const C& c) { return json(c.optimizer.learning_rate); },
         [](C& c, const json& v) { c.optimizer.learning_rate = as_double("lr", v); }},
        {"beta1", [](const C& c) { return json(c.optimizer.beta1); },
         [](C& c, const json& v) { c.optimizer.beta1 = as_double("beta1", v); }},
        {"beta2", [](const C& c) { return json(c.optimizer.beta2); },
         [](C& c, const json& v) { c.optimizer.beta2 = as_double("beta2", v); }},
        {"momentum", [](const C& c) { return json(c.optimizer.momentum); },
         [](C& c, const json& v) { c.optimizer.momentum = as_double("momentum", v); }},
        {"seed", [](const C& c) { return json(c.seed); },
         [](C& c, const json& v) { c.seed = as_uint("seed", v); }},
        {"epsilon", [](const C& c) { return json(c.epsilon); },
         [](C& c, const json& v) { c.epsilon = as_double("epsilon", v); }},
        {"kmeans.max_iters", [](const C& c) { return json(c.kmeans_max_iters); },
         [](C& c, const json& v) { c.kmeans_max_iters = static_cast<int>(as_int("kmeans.max_iters", v)); }},
        {"kmeans.final_max_iters", [](const C& c) { return json(c.final_kmeans_max_iters); },
         [](C& c, const json& v) {
             c.final_kmeans_max_iters = static_cast<int>(as_int("kmeans.final_max_iters", v));
         }},
        {"gram", [](const C& c) { return json(c.orth.form == GramForm::feature ? "feature" : "sample"); },
         [](C& c, const json& v) {
             c.orth.form = choice<GramForm>("gram", v, {{"feature", GramForm::feature},
                                                        {"sample", GramForm::sample}});
         }},
        {"gram.per_sample", [](const C& c) { return json(c.orth.per_sample_scaling); },
         [](C& c, const json& v) { c.orth.per_sample_scaling = as_bool("gram.per_sample", v); }},
        {"silhouette",
         [](const C& c) { return json(c.silhouette == SilhouetteDistance::squared ? "squared" : "euclidean"); },
         [](C& c, const json& v) {
             c.silhouette = choice<SilhouetteDistance>(
                 "silhouette", v,
                 {{"squared", SilhouetteDistance::squared}, {"euclidean", SilhouetteDistance::euclidean}});
         }},
        {"teacher", [](const C& c) { return json(c.teacher == TeacherGradient::flow ? "flow" : "stop"); },
         [](C& c, const json& v) {
             c.teacher = choice<TeacherGradient>("teacher", v, {{"flow", TeacherGradient::flow},
                                                                {"stop", TeacherGradient::stop}});
         }},
        {"compactness.form",
         [](const C& c) { return json(c.compactness == CompactnessForm::reciprocal ? "reciprocal" : "direct"); },
         [](C& c, const json& v) {
             c.compactness = choice<CompactnessForm>(
                 "compactness.form", v,
                 {{"reciprocal", CompactnessForm::reciprocal}, {"direct", CompactnessForm::direct}});
         }},
        {"standardize", [](const C& c) { return json(c.standardize); },
         [](C& c, const json& v) { c.standardize = as_bool("standardize", v); }},
        {"checkpoint", [](const C& c) { return json(c.save_checkpoint); },
         [](C& c, const json& v) { c.save_checkpoint = as_bool("checkpoint", v); }},
        {"one_hot_guidance", [](const C& c) { return json(c.one_hot_guidance); },
         [](C& c, const json& v) { c.one_hot_guidance = as_bool("one_hot_guidance", v); }},
    };
    return table;
}

const Field& field(const std::string& key) {
    for (const Field& f : fields()) {
        if (key == f.key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

// Command-line values arrive as text; their JSON type follows the default's type.
json parse_override(const std::string& key, const std::string& text) {
    const json current = field(key).get(TrainConfig{});
    try {
        if (current.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw ConfigError("");
        }
        if (current.is_number_integer()) {
            std::size_t used = 0;
            if (!text.empty() && text.front() == '-') {
                const long long v = std::stoll(text, &used);
                if (used != text.size()) throw ConfigError("");
                return v;
            }
            const unsigned long long v = std::stoull(text, &used);
            if (used != text.size()) throw ConfigError("");
            return v;
        }
        if (current.is_number()) {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw ConfigError("");
            return v;
        }
        if (current.is_array()) {
            json arr = json::array();
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                std::size_t used = 0;
                const long long v = std::stoll(item, &used);
                if (used != item.size()) throw ConfigError("");
                arr.push_back(v);
            }
            return arr;
        }
    } catch (const std::logic_error&) {
        // stoll/stod failures fall through to the error below
    } catch (const ConfigError&) {
    }
    if (current.is_string()) return text;
    throw ConfigError("invalid value '" + text + "' for --" + key);
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json epoch_json(const EpochLog& e) {
    json batches = json::array();
    for (const BatchLog& b : e.batches) {
        json jb{{"loss", b.loss}, {"ae", b.ae}, {"align", b.align}, {"compact", b.compact},
                {"silhouettes", b.silhouettes}, {"reliable", b.reliable}};
        if (b.weights.size() > 0) jb["weights"] = matrix_json(b.weights);
        batches.push_back(std::move(jb));
    }
    return {{"epoch", e.epoch}, {"loss", e.loss},   {"ae", e.ae},
            {"align", e.align}, {"compact", e.compact}, {"silhouettes", e.silhouettes},
            {"batches", std::move(batches)}};
}

std::vector<int> slice(std::span<const int> all, Index start, Index n) {
    return {all.begin() + start, all.begin() + start + n};
}

std::vector<int> read_assignments(const fs::path& path) {
    try {
        return read_labels_csv(path);
    } catch (const DataError& e) {
        throw DataError(std::string("assignments: ") + e.what());
    }
}

}  // namespace

json config_to_json(const TrainConfig& config) {
    json out = json::object();
    for (const Field& f : fields()) out[f.key] = f.get(config);
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Field& f : fields()) keys.emplace_back(f.key);
    return keys;
}

TrainConfig config_from_json(const json& flat) {
    if (!flat.is_object()) throw ConfigError("config must be a JSON object");
    TrainConfig config;
    for (const auto& [key, value] : flat.items()) field(key).set(config, value);
    return config;
}

TrainConfig resolve_config(const std::optional<fs::path>& file, const Overrides& overrides) {
    json flat = json::object();
    if (file) {
        flat = read_json(*file);
        if (!flat.is_object()) throw ConfigError("config file must hold a JSON object");
        if (auto it = flat.find("dataset"); it != flat.end() && it->is_string()) {
            const fs::path p = it->get<std::string>();
            if (p.is_relative()) *it = (file->parent_path() / p).lexically_normal().string();
        }
    }
    for (const auto& [key, text] : overrides) flat[key] = parse_override(key, text);
    return config_from_json(flat);
}

fs::path default_output_root() {
    if (const char* root = std::getenv("UMC_OUTPUT_ROOT"); root && *root) return root;
    return "runs";
}

json scores_json(const metrics::Scores& s) {
    return {{"nmi", s.nmi}, {"acc", s.acc}, {"f1", s.f1}, {"precision", s.precision}};
}

json score_run(const ViewBundle& data, std::span<const int> assignments,
               std::span<const Matrix> latents, int k, std::uint64_t seed,
               metrics::NmiNormalization norm) {
    const std::vector<int> truth = data.stacked_labels();
    if (assignments.size() != truth.size()) {
        throw DataError("assignments hold " + std::to_string(assignments.size()) +
                        " entries, dataset has " + std::to_string(truth.size()) + " samples");
    }
    json per_view = json::array();
    Index start = 0;
    for (std::size_t v = 0; v < data.view_count(); ++v) {
        const Index n = data.views[v].rows();
        const auto& labels = data.labels[v];
        json entry{{"view", v + 1},
                   {"samples", n},
                   {"joint", scores_json(metrics::evaluate(labels, slice(assignments, start, n), norm))}};
        if (v < latents.size()) {
            const auto own = kmeans(latents[v], k, derive_seed({seed, 0x5056, v}), 300);
            entry["latent_kmeans"] = scores_json(metrics::evaluate(labels, own.assignments, norm));
        }
        per_view.push_back(std::move(entry));
        start += n;
    }
    return {{"dataset", data.name},
            {"clusters", k},
            {"samples", truth.size()},
            {"pooled", scores_json(metrics::evaluate(truth, assignments, norm))},
            {"per_view", std::move(per_view)}};
}

TrainRun run_train(const TrainConfig& config, const fs::path& run_dir) {
    if (config.dataset.empty()) throw ConfigError("no dataset given");
    const ViewBundle data = load_dataset(config.dataset, LoadOptions{config.standardize});
    const int k = config.clusters > 0 ? config.clusters : data.clusters;
    config.validate(data.view_count(), k);

    fs::create_directories(run_dir);
    const json outputs{{"train_log", "train_log.jsonl"},
                       {"assignments", "assignments.csv"},
                       {"metrics", "metrics.json"},
                       {"latents", "latents_view<v>.csv"},
                       {"checkpoint", config.save_checkpoint ? json("checkpoint.bin") : json()}};
    write_json(run_dir / "run_manifest.json",
               {{"version", kVersion},
                {"config", config_to_json(config)},
                {"dataset_hash", dataset_hash(config.dataset)},
                {"started_at", utc_now()},
                {"run_dir", fs::absolute(run_dir).string()},
                {"outputs", outputs}});

    std::ofstream log(run_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("cannot write train log in " + run_dir.string());
    TrainRun run;
    run.run_dir = run_dir;
    run.fit = fit(data, config, [&](const EpochLog& e) { log << epoch_json(e).dump() << '\n' << std::flush; });

    const std::vector<Matrix> latents = extract_latents(run.fit.models, data);
    for (std::size_t v = 0; v < latents.size(); ++v) {
        write_matrix_csv(run_dir / ("latents_view" + std::to_string(v + 1) + ".csv"), latents[v]);
    }
    run.assignments = final_cluster(latents, k, config.seed, config.final_kmeans_max_iters);
    write_labels_csv(run_dir / "assignments.csv", run.assignments);

    run.metrics = score_run(data, run.assignments, latents, k, config.seed);
    run.metrics["mode"] = to_string(config.mode);
    run.metrics["seed"] = config.seed;
    run.metrics["epochs"] = config.epochs;
    write_json(run_dir / "metrics.json", run.metrics);
    if (config.save_checkpoint) save_checkpoint(run_dir / "checkpoint.bin", run.fit.models);
    return run;
}

json run_eval(const EvalRequest& request) {
    const ViewBundle data = load_dataset(request.dataset, LoadOptions{request.standardize});
    const int k = request.k > 0 ? request.k : data.clusters;
    std::vector<Matrix> latents;
    std::vector<int> assignments;
    if (request.latents_dir) {
        for (std::size_t v = 0; v < data.view_count(); ++v) {
            const fs::path p = *request.latents_dir / ("latents_view" + std::to_string(v + 1) + ".csv");
            latents.push_back(read_matrix_csv(p));
            if (latents.back().rows() != data.views[v].rows()) {
                throw DataError(p.string() + " has " + std::to_string(latents.back().rows()) +
                                " rows, view " + std::to_string(v + 1) + " has " +
                                std::to_string(data.views[v].rows()));
            }
        }
    }
    if (request.assignments) {
        assignments = read_assignments(*request.assignments);
    } else if (!latents.empty()) {
        assignments = final_cluster(latents, k, request.seed);
    } else {
        throw ConfigError("eval needs an assignments file or a latents directory");
    }

    json out = score_run(data, assignments, latents, k, request.seed, request.norm);
    for (std::size_t v = 0; v < data.view_count(); ++v) {
        const auto raw = kmeans(data.views[v], k, derive_seed({request.seed, 0x4f52, v}), 300);
        out["per_view"][v]["original"] = scores_json(metrics::evaluate(data.labels[v], raw.assignments, request.norm));
    }
    return out;
}

std::vector<AblationCell> parse_grid(const std::string& spec) {
    std::vector<AblationCell> cells;
    if (spec == "terms") {
        // Lines 1-4 without alignment, 5-8 with single-teacher KL, 9-12 with weighted KL;
        // within each block Orth and C toggle as (off, off), (on, off), (off, on), (on, on).
        int line = 1;
        for (int block = 0; block < 3; ++block) {
            for (int combo = 0; combo < 4; ++combo) {
                AblationCell c;
                c.line = line++;
                c.mode = block == 2 ? Mode::RGs : Mode::RG;
                c.alignment = block > 0;
                c.orth = combo == 1 || combo == 3;
                c.compactness = combo >= 2;
                cells.push_back(c);
            }
        }
        return cells;
    }
    if (spec == "weighting") {
        int line = 1;
        for (Mode m : {Mode::RGs, Mode::URGs, Mode::NRGs}) cells.push_back({line++, m, true, true, true});
        return cells;
    }
    std::stringstream ss(spec);
    std::string item;
    int line = 1;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        AblationCell c;
        c.line = line++;
        c.mode = mode_from_string(item.substr(0, colon));
        if (colon == std::string::npos) {
            cells.push_back(c);
            continue;
        }
        c.orth = c.compactness = c.alignment = false;
        std::stringstream terms(item.substr(colon + 1));
        std::string term;
        while (std::getline(terms, term, '+')) {
            if (term == "orth") c.orth = true;
            else if (term == "c") c.compactness = true;
            else if (term == "kl") c.alignment = true;
            else if (term != "none") throw ConfigError("unknown ablation term '" + term + "' (orth, c, kl, none)");
        }
        cells.push_back(c);
    }
    if (cells.empty()) throw ConfigError("empty ablation grid");
    return cells;
}

std::string run_ablate(const TrainConfig& base, const std::vector<AblationCell>& cells,
                       const fs::path& out_dir) {
    if (cells.empty()) throw ConfigError("empty ablation grid");
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "line,mode,orth,compactness,alignment,nmi,acc,f1,precision\n";
    csv << std::setprecision(17);
    for (const AblationCell& cell : cells) {
        TrainConfig config = base;
        config.mode = cell.mode;
        config.use_orth = cell.orth;
        config.use_compactness = cell.compactness;
        config.use_alignment = cell.alignment;
        const TrainRun run = run_train(config, out_dir / ("cell_" + std::to_string(cell.line)));
        const json& p = run.metrics["pooled"];
        csv << cell.line << ',' << to_string(cell.mode) << ',' << cell.orth << ',' << cell.compactness
            << ',' << cell.alignment << ',' << p["nmi"].get<double>() << ',' << p["acc"].get<double>()
            << ',' << p["f1"].get<double>() << ',' << p["precision"].get<double>() << '\n';
    }
    std::ofstream out(out_dir / "summary.csv", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (out_dir / "summary.csv").string());
    out << csv.str();
    return csv.str();
}

ViewBundle run_synth(const SynthSpec& spec, std::uint64_t unpair_seed, bool paired,
                     const fs::path& out_dir) {
    ViewBundle bundle = synth_generate(spec);
    if (!paired) bundle = unpair(bundle, unpair_seed);
    save_dataset(bundle, out_dir);
    return bundle;
}

ViewBundle run_unpair(const fs::path& paired_dir, std::uint64_t seed, const fs::path& out_dir) {
    const ViewBundle paired = load_dataset(paired_dir, LoadOptions{false});
    ViewBundle bundle = unpair(paired, seed);
    save_dataset(bundle, out_dir);
    return bundle;
}

}  // namespace umc::app
