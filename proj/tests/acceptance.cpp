// Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fails.
//
//   acceptance [--only 1,2,5] [--work DIR] [--digit PAIRED_BUNDLE]
//
// Criteria 5-9 train full models and take several minutes each on one core.

#include "oracles.hpp"
#include "support.hpp"
#include "umc/app.hpp"
#include "umc/cluster.hpp"
#include "umc/data.hpp"
#include "umc/losses.hpp"
#include "umc/metrics.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#ifndef UMC_DIGIT_DIR
#define UMC_DIGIT_DIR ""
#endif

using namespace umc;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kSilhouetteTol = 1e-12;
constexpr double kSilhouetteSeconds = 30.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kCompositeGradStep = 1e-4;  // objectives mixing O(10) and O(1e-6) terms
constexpr double kWeightTol = 1e-12;
constexpr double kWorkedExampleTol = 1e-5;
constexpr double kNmiTol = 1e-10;
constexpr double kPairTol = 1e-12;
constexpr double kSynthNmi = 0.90;
constexpr double kSynthGap = 0.15;
constexpr double kSynthSeconds = 300.0;
constexpr double kDigitGap = 0.20;
constexpr double kDigitSoftNmi = 0.75;
constexpr double kDigitSeconds = 900.0;
constexpr double kLossRatio = 0.5;
constexpr double kLossSpread = 0.05;
constexpr double kReliableShare = 0.60;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

// ---------------------------------------------------------------------------------
// 1. silhouette

Outcome silhouette_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> nd(2, 200), kd(2, 6), dd(1, 8);
    double worst = 0, lib_seconds = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = nd(rng), k = kd(rng);
        const Matrix z = test::random_matrix(rng, n, dd(rng));
        const auto labels = test::random_labels(rng, static_cast<std::size_t>(n), k);
        const auto t0 = std::chrono::steady_clock::now();
        const Vector s = silhouette_samples(z, labels);
        lib_seconds += seconds_since(t0);
        const auto o = oracle::silhouette(z, labels);
        for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(s(i) - o[i]));
    }
    return {worst <= kSilhouetteTol && lib_seconds < kSilhouetteSeconds,
            fmt("500 instances, max |diff| %.2e (tol %.0e), %.2f s", worst, kSilhouetteTol, lib_seconds)};
}

// ---------------------------------------------------------------------------------
// 2. gradient checks

using ad::Var;

struct GradFixture {
    std::vector<ad::Parameter> logits;   // latent pre-activations per view
    std::vector<ad::Parameter> readout;  // linear decoder per view
    std::vector<Matrix> inputs;
    std::vector<ClusterState<double>> clusters;

    std::vector<ad::Parameter*> params() {
        std::vector<ad::Parameter*> ps;
        for (auto& p : logits) ps.push_back(&p);
        for (auto& p : readout) ps.push_back(&p);
        return ps;
    }

    std::vector<ViewTerms> views(ad::Tape& t) {
        std::vector<ViewTerms> out;
        for (std::size_t v = 0; v < logits.size(); ++v) {
            Var z = ad::softmax_rows(t.parameter(logits[v]));
            out.push_back({t.constant(inputs[v]), z, ad::matmul(z, t.parameter(readout[v]))});
        }
        return out;
    }

    std::vector<Var> latents(ad::Tape& t) {
        std::vector<Var> out;
        for (auto& v : views(t)) out.push_back(v.latent);
        return out;
    }

    std::vector<Var> distributions(ad::Tape& t) {
        std::vector<Var> out;
        for (auto& z : latents(t)) out.push_back(view_distribution(z));
        return out;
    }

    BatchGraph graph(ad::Tape& t) { return {views(t), clusters}; }
};

GradFixture grad_fixture(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> vd(2, 3), bd(4, 16), ld(3, 8), dd(2, 6);
    const int views = vd(rng), latent = ld(rng), k = std::min(3, latent);
    GradFixture f;
    for (int v = 0; v < views; ++v) {
        const Index rows = bd(rng), dim = dd(rng);
        f.logits.emplace_back(test::random_matrix(rng, rows, latent, -2, 2));
        f.readout.emplace_back(test::random_matrix(rng, latent, dim));
        f.inputs.push_back(test::random_matrix(rng, rows, dim));
        // Assignments fixed, centroids off the sample rows: a centroid on a sample
        // is a kink of the distance.
        ClusterState<double> s;
        for (Index i = 0; i < rows; ++i) s.assignments.push_back(static_cast<int>(i % k));
        s.centroids = test::softmax_rows(test::random_matrix(rng, k, latent, -2, 2));
        f.clusters.push_back(std::move(s));
    }
    return f;
}

Outcome gradient_checks() {
    std::mt19937_64 rng(202);
    std::map<std::string, double> worst;
    bool pass = true;
    const auto check = [&](const std::string& name, GradFixture& f, const ad::LossBuilder& build, double step) {
        const auto ps = f.params();
        const auto r = ad::grad_check(build, ps, step, kGradTol);
        worst[name] = std::max(worst[name], r.max_rel_error);
        pass = pass && r.passed;
    };
    const std::vector<WeightMode> modes{WeightMode::sigmoid, WeightMode::uniform, WeightMode::normalized};
    for (int trial = 0; trial < 10; ++trial) {
        GradFixture f = grad_fixture(rng);
        const auto v = f.logits.size();
        std::vector<double> sil(v);
        for (auto& s : sil) s = std::uniform_real_distribution<double>(0.05, 0.9)(rng);
        for (GramForm g : {GramForm::feature, GramForm::sample}) {
            const OrthOptions o{g, true};
            check(g == GramForm::feature ? "ae+orth(feature)" : "ae+orth(sample)", f,
                  [&](ad::Tape& t) { return ae_orth_loss(f.views(t), 0.1, o); }, kGradStep);
        }
        check("compactness", f, [&](ad::Tape& t) { return compactness_loss(f.latents(t), f.clusters, 1e-6); },
              kGradStep);
        check("align-one", f, [&](ad::Tape& t) { return align_loss_one(f.distributions(t), trial % v); },
              kGradStep);
        for (WeightMode m : modes) {
            const Matrix w = reliable_weights(sil, m).weights;
            check("align-multi(" + to_string(m) + ")", f,
                  [&](ad::Tape& t) { return align_loss_multi(f.distributions(t), w); }, kGradStep);
        }
        const LossWeights lw{0.1, 1.0, 0.01};
        check("total RG", f, [&](ad::Tape& t) { return total_loss_rg(f.graph(t), trial % v, lw).total; },
              kCompositeGradStep);
        for (WeightMode m : modes) {
            const Matrix w = reliable_weights(sil, m).weights;
            check("total RGs(" + to_string(m) + ")", f,
                  [&](ad::Tape& t) { return total_loss_rgs(f.graph(t), w, lw).total; }, kCompositeGradStep);
        }
    }
    std::ostringstream d;
    double overall = 0;
    for (const auto& [name, e] : worst) overall = std::max(overall, e);
    d << worst.size() << " losses x 10 fixtures, max rel error " << fmt("%.2e", overall) << " (tol "
      << fmt("%.0e", kGradTol) << ")";
    if (!pass) {
        for (const auto& [name, e] : worst) d << "; " << name << " " << fmt("%.2e", e);
    }
    return {pass, d.str()};
}

// ---------------------------------------------------------------------------------
// 3. reliable-view weights

Outcome weight_properties() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> vd(2, 8);
    std::uniform_real_distribution<double> sd(-1, 1);
    double worst = 0;
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int v = vd(rng);
        std::vector<double> s(static_cast<std::size_t>(v));
        for (auto& x : s) x = sd(rng);
        const auto r = reliable_weights(s, WeightMode::sigmoid);
        const Matrix& w = r.weights;
        if (r.reliable != static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())) ++violations;
        for (int row = 0; row < v; ++row) {
            const auto o = oracle::sigmoid_row(s, static_cast<std::size_t>(row));
            for (int c = 0; c < v; ++c) {
                worst = std::max(worst, std::abs(w(row, c) - o[static_cast<std::size_t>(c)]));
                if (w(row, c) < 0) ++violations;
                if (s[c] < s[row] && w(row, c) != 0.0) ++violations;  // less reliable views never guide
                for (int c2 = 0; c2 < v; ++c2) {
                    if (s[c] > s[c2] && w(row, c2) > w(row, c) + kWeightTol) ++violations;
                }
            }
            worst = std::max(worst, std::abs(w.row(row).sum() - 1.0));
        }
        if (w(r.reliable, r.reliable) != 1.0) ++violations;

        const Matrix u = reliable_weights(s, WeightMode::uniform).weights;
        const Matrix nz = reliable_weights(s, WeightMode::normalized).weights;
        for (int row = 0; row < v; ++row) {
            const auto ou = oracle::uniform_row(s, static_cast<std::size_t>(row));
            const auto on = oracle::normalized_row(s, static_cast<std::size_t>(row));
            for (int c = 0; c < v; ++c) {
                if (u(row, c) != ou[static_cast<std::size_t>(c)]) ++violations;
                worst = std::max(worst, std::abs(nz(row, c) - on[static_cast<std::size_t>(c)]));
            }
        }
    }
    const Matrix ex = reliable_weights(std::vector<double>{0.6, 0.3, -0.2}, WeightMode::sigmoid).weights;
    const double ex_err = (ex.row(2) - (RowVector(3) << 0.38656, 0.34392, 0.26952).finished()).cwiseAbs().maxCoeff();
    return {worst <= kWeightTol && violations == 0 && ex_err <= kWorkedExampleTol,
            fmt("1000 vectors x 3 modes, oracle/row-sum max diff %.2e, %d property violations; worked example off by %.1e",
                worst, violations, ex_err)};
}

// ---------------------------------------------------------------------------------
// 4. metrics

Outcome metric_oracles() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> kd(1, 6), nd(2, 120);
    int acc_mismatch = 0;
    double nmi_err = 0, pair_err = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = kd(rng);
        const auto n = static_cast<std::size_t>(nd(rng));
        const auto t = test::random_labels(rng, n, k), p = test::random_labels(rng, n, k);
        if (metrics::accuracy_hungarian(t, p) != oracle::accuracy_brute_force(t, p)) ++acc_mismatch;
        nmi_err = std::max(nmi_err, std::abs(metrics::nmi(t, p) - oracle::nmi_geometric(t, p)));
        const auto s = metrics::pairwise_f1_precision(t, p);
        const auto o = oracle::pair_enumeration(t, p);
        pair_err = std::max({pair_err, std::abs(s.f1 - o.f1), std::abs(s.precision - o.precision)});
    }
    return {acc_mismatch == 0 && nmi_err <= kNmiTol && pair_err <= kPairTol,
            fmt("200 instances: ACC mismatches %d, NMI max diff %.2e (tol %.0e), F1/precision max diff %.2e (tol %.0e)",
                acc_mismatch, nmi_err, kNmiTol, pair_err, kPairTol)};
}

// ---------------------------------------------------------------------------------
// 5-9. training runs

struct Timed {
    app::TrainRun run;
    double seconds = 0;
    double nmi() const { return run.metrics["pooled"]["nmi"].get<double>(); }
};

Timed train(TrainConfig config, const fs::path& dir) {
    fs::remove_all(dir);
    const auto t0 = std::chrono::steady_clock::now();
    Timed t{app::run_train(config, dir), 0};
    t.seconds = seconds_since(t0);
    std::cout << "  trained " << dir.filename().string() << ": pooled NMI " << fmt("%.4f", t.nmi()) << " in "
              << fmt("%.0f", t.seconds) << " s" << std::endl;
    return t;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Runs {
public:
    Runs(fs::path work, fs::path digit) : work_(std::move(work)), digit_(std::move(digit)) {}

    // Three noise-tiered views, K = 5, 200 samples per cluster before unpairing.
    fs::path synth_dataset() {
        const fs::path dir = work_ / "synth";
        if (!fs::exists(dir / "manifest.json")) {
            SynthSpec spec;
            spec.clusters = 5;
            spec.views = 3;
            spec.per_cluster = 200;
            spec.separation = 6.0;
            spec.noise = {0.3, 0.6, 0.9};
            spec.seed = 7;
            save_dataset(unpair(synth_generate(spec), 7), dir);
        }
        return dir;
    }

    TrainConfig synth_config() {
        TrainConfig c;
        c.dataset = synth_dataset().string();
        c.seed = 1;
        return c;
    }

    const Timed& synth_full() {
        if (!full_) full_ = train(synth_config(), work_ / "synth_rgs");
        return *full_;
    }

    const Timed& synth_no_alignment() {
        if (!no_align_) {
            TrainConfig c = synth_config();
            c.weights.lambda2 = 0.0;
            no_align_ = train(c, work_ / "synth_rgs_lambda2_0");
        }
        return *no_align_;
    }

    Timed synth_repeat() { return train(synth_config(), work_ / "synth_rgs_repeat"); }

    std::optional<fs::path> digit_dataset() {
        if (digit_.empty() || !fs::exists(digit_ / "manifest.json")) return std::nullopt;
        const fs::path dir = work_ / "digit";
        if (!fs::exists(dir / "manifest.json")) {
            save_dataset(unpair(load_dataset(digit_, LoadOptions{false}), 1), dir);
        }
        return dir;
    }

    const fs::path& digit_source() const { return digit_; }

private:
    fs::path work_, digit_;
    std::optional<Timed> full_, no_align_;
};

Outcome synthetic_end_to_end(Runs& runs) {
    const Timed& full = runs.synth_full();
    const Timed& ablated = runs.synth_no_alignment();
    const double gap = full.nmi() - ablated.nmi();
    const double slowest = std::max(full.seconds, ablated.seconds);
    return {full.nmi() >= kSynthNmi && gap >= kSynthGap && slowest < kSynthSeconds,
            fmt("pooled NMI %.4f (need >= %.2f), lambda2=0 NMI %.4f, gap %.4f (need >= %.2f), slowest run %.0f s",
                full.nmi(), kSynthNmi, ablated.nmi(), gap, kSynthGap, slowest)};
}

Outcome digit_reproduction(Runs& runs) {
    const auto data = runs.digit_dataset();
    if (!data) {
        return {false, "no paired Digit bundle at '" + runs.digit_source().string() +
                           "' (build one with tools/prepare_mfeat.py, pass --digit)"};
    }
    TrainConfig c;
    c.dataset = data->string();
    c.seed = 1;
    const Timed full = train(c, data->parent_path() / "digit_rgs");
    c.weights.lambda2 = 0.0;
    c.weights.lambda3 = 0.0;
    c.use_orth = false;
    const Timed base = train(c, data->parent_path() / "digit_no_alignment");
    const double gap = full.nmi() - base.nmi();
    const double slowest = std::max(full.seconds, base.seconds);
    return {gap >= kDigitGap && slowest < kDigitSeconds,
            fmt("pooled NMI %.4f vs no-alignment %.4f, gap %.4f (need >= %.2f); soft target NMI >= %.2f %s; "
                "slowest run %.0f s",
                full.nmi(), base.nmi(), gap, kDigitGap, kDigitSoftNmi, full.nmi() >= kDigitSoftNmi ? "met" : "missed",
                slowest)};
}

Outcome convergence_shape(Runs& runs) {
    const auto& log = runs.synth_full().run.fit.log;
    if (log.size() < 10) return {false, "fewer than 10 epochs logged"};
    const double ratio = log.back().loss / log.front().loss;
    double lo = INFINITY, hi = -INFINITY, mean = 0;
    for (std::size_t e = log.size() - 10; e < log.size(); ++e) {
        lo = std::min(lo, log[e].loss);
        hi = std::max(hi, log[e].loss);
        mean += log[e].loss / 10;
    }
    const double spread = (hi - lo) / mean;
    return {ratio <= kLossRatio && spread <= kLossSpread,
            fmt("final/first loss %.3f (need <= %.2f), last-10 spread %.1f%% (need <= %.0f%%)", ratio, kLossRatio,
                100 * spread, 100 * kLossSpread)};
}

Outcome adaptive_selection(Runs& runs) {
    std::size_t batches = 0, low_noise = 0;
    std::set<Index> guides;  // views weighting some other view
    std::vector<std::size_t> counts;
    for (const auto& e : runs.synth_full().run.fit.log) {
        for (const auto& b : e.batches) {
            ++batches;
            counts.resize(std::max(counts.size(), b.silhouettes.size()));
            ++counts[b.reliable];
            low_noise += b.reliable == 0;
            for (Index v = 0; v < b.weights.rows(); ++v) {
                for (Index r = 0; r < b.weights.cols(); ++r) {
                    if (r != v && b.weights(v, r) > 0) guides.insert(r);
                }
            }
        }
    }
    const double share = batches ? static_cast<double>(low_noise) / static_cast<double>(batches) : 0.0;
    std::ostringstream picks;
    for (std::size_t v = 0; v < counts.size(); ++v) picks << (v ? "/" : "") << counts[v];
    return {share >= kReliableShare && guides.size() >= 2,
            fmt("low-noise view reliable in %.1f%% of %zu batches (need >= %.0f%%; picks per view %s), "
                "%zu views guide others",
                100 * share, batches, 100 * kReliableShare, picks.str().c_str(), guides.size())};
}

Outcome determinism(Runs& runs) {
    const Timed& a = runs.synth_full();
    const Timed b = runs.synth_repeat();
    const bool metrics_same = read_bytes(a.run.run_dir / "metrics.json") == read_bytes(b.run.run_dir / "metrics.json");
    const bool ckpt_same = read_bytes(a.run.run_dir / "checkpoint.bin") == read_bytes(b.run.run_dir / "checkpoint.bin");
    return {metrics_same && ckpt_same, std::string("metrics.json ") + (metrics_same ? "identical" : "differs") +
                                           ", checkpoint.bin " + (ckpt_same ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"acceptance criteria"};
    std::vector<int> only;
    fs::path work = fs::temp_directory_path() / "umc_acceptance";
    std::string digit = UMC_DIGIT_DIR;
    cli.add_option("--only", only, "criteria to run")->delimiter(',');
    cli.add_option("--work", work, "scratch directory for datasets and runs");
    cli.add_option("--digit", digit, "paired Digit bundle (tools/prepare_mfeat.py)");
    CLI11_PARSE(cli, argc, argv);
    fs::create_directories(work);

    Runs runs(work, digit);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"silhouette matches oracle", silhouette_oracle},
        {"loss gradients", gradient_checks},
        {"reliable-view weights", weight_properties},
        {"metric oracles", metric_oracles},
        {"synthetic end-to-end", [&] { return synthetic_end_to_end(runs); }},
        {"Digit alignment gain", [&] { return digit_reproduction(runs); }},
        {"convergence shape", [&] { return convergence_shape(runs); }},
        {"adaptive view selection", [&] { return adaptive_selection(runs); }},
        {"determinism", [&] { return determinism(runs); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    return failed ? 1 : 0;
}
