#include "umc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace umc {

std::string to_string(Mode m) {
    switch (m) {
    case Mode::RG: return "RG";
    case Mode::RGs: return "RGs";
    case Mode::URGs: return "URGs";
    case Mode::NRGs: return "NRGs";
    }
    return "RGs";
}

Mode mode_from_string(const std::string& s) {
    if (s == "RG") return Mode::RG;
    if (s == "RGs") return Mode::RGs;
    if (s == "URGs") return Mode::URGs;
    if (s == "NRGs") return Mode::NRGs;
    throw ConfigError("unknown mode '" + s + "' (expected RG, RGs, URGs or NRGs)");
}

namespace {

WeightMode weight_mode(Mode m) {
    switch (m) {
    case Mode::URGs: return WeightMode::uniform;
    case Mode::NRGs: return WeightMode::normalized;
    default: return WeightMode::sigmoid;
    }
}

constexpr std::uint64_t kShuffleTag = 0x5348;
constexpr std::uint64_t kKMeansTag = 0x4b4d;
constexpr std::uint64_t kModelTag = 0x4d44;
constexpr std::uint64_t kFinalTag = 0x464e;

}  // namespace

LossWeights TrainConfig::effective_weights() const {
    LossWeights w = weights;
    if (!use_orth) w.lambda1 = 0.0;
    if (!use_alignment) w.lambda2 = 0.0;
    if (!use_compactness) w.lambda3 = 0.0;
    return w;
}

ObjectiveOptions TrainConfig::objective_options() const {
    ObjectiveOptions o;
    o.orth = orth;
    o.teacher = teacher;
    o.compactness = compactness;
    o.epsilon = epsilon;
    return o;
}

void TrainConfig::validate(std::size_t views, int k) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0 || weights.lambda3 < 0.0) {
        throw ConfigError("lambda values must be >= 0");
    }
    if (k < 1) throw ConfigError("cluster count K must be >= 1");
    if (batch_size < static_cast<int>(views) * k) {
        throw ConfigError("batch_size " + std::to_string(batch_size) + " is below V*K = " +
                          std::to_string(static_cast<int>(views) * k));
    }
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    for (Index h : hidden) {
        if (h < 1) throw ConfigError("hidden widths must be >= 1");
    }
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (kmeans_max_iters < 1 || final_kmeans_max_iters < 1) {
        throw ConfigError("kmeans iteration limits must be >= 1");
    }
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    auto mix = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    for (std::uint64_t p : parts) state = mix(state + 0x9e3779b97f4a7c15ULL + p);
    return state;
}

BatchPlan make_batches(const ViewBundle& data, int batch_size, int k, std::uint64_t seed, int epoch) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    const Index total = data.total_samples();
    const Index batches = (total + batch_size - 1) / batch_size;
    BatchPlan plan(static_cast<std::size_t>(batches),
                   std::vector<std::vector<Index>>(data.view_count()));

    for (std::size_t v = 0; v < data.view_count(); ++v) {
        const Index n = data.views[v].rows();
        if (n < k) {
            throw DataError("view " + std::to_string(v + 1) + " has " + std::to_string(n) +
                            " samples, fewer than K=" + std::to_string(k));
        }
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::mt19937_64 rng(derive_seed({seed, kShuffleTag, static_cast<std::uint64_t>(epoch), v}));
        std::shuffle(order.begin(), order.end(), rng);

        // Proportional chunk, rounded up so every row is covered.
        const Index chunk = (static_cast<Index>(batch_size) * n + total - 1) / total;
        std::vector<Index> sizes(static_cast<std::size_t>(batches));
        bool proportional_ok = true;
        for (Index b = 0; b < batches; ++b) {
            sizes[b] = std::clamp<Index>(n - b * chunk, 0, chunk);
            proportional_ok = proportional_ok && sizes[b] >= k;
        }
        if (!proportional_ok) {
            const Index base = n / batches;
            if (base < k) {
                throw DataError("view " + std::to_string(v + 1) + " has " + std::to_string(n) +
                                " samples, too few for " + std::to_string(batches) +
                                " batches of at least K=" + std::to_string(k));
            }
            for (Index b = 0; b < batches; ++b) sizes[b] = base + (b < n % batches ? 1 : 0);
        }
        Index start = 0;
        for (Index b = 0; b < batches; ++b) {
            plan[b][v].assign(order.begin() + start, order.begin() + start + sizes[b]);
            start += sizes[b];
        }
    }
    return plan;
}

Trainer::Trainer(const ViewBundle& data, TrainConfig config)
    : data_(data), config_(std::move(config)), optimizer_(config_.optimizer) {
    data_.validate();
    k_ = config_.clusters > 0 ? config_.clusters : data_.clusters;
    config_.validate(data_.view_count(), k_);
    const std::uint64_t model_seed = derive_seed({config_.seed, kModelTag});
    models_.reserve(data_.view_count());
    for (std::size_t v = 0; v < data_.view_count(); ++v) {
        models_.emplace_back(v, default_widths(data_.views[v].cols(), config_.latent_dim, config_.hidden),
                             model_seed);
    }
    params_ = collect_parameters(models_);
}

BatchLog Trainer::train_batch(const std::vector<std::vector<Index>>& batch, int epoch,
                              std::size_t index) {
    const std::size_t views = data_.view_count();
    ad::Tape tape;
    BatchGraph graph;
    BatchLog log;
    for (std::size_t v = 0; v < views; ++v) {
        const auto& rows = batch[v];
        Matrix x(static_cast<Index>(rows.size()), data_.views[v].cols());
        for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Index>(i)) = data_.views[v].row(rows[i]);
        ad::Var input = tape.constant(std::move(x));
        ad::Var latent = models_[v].encode(tape, input);
        ad::Var recon = models_[v].decode(tape, latent);
        graph.views.push_back({input, latent, recon});

        const std::uint64_t seed = derive_seed({config_.seed, kKMeansTag,
                                                static_cast<std::uint64_t>(epoch), index, v});
        graph.clusters.push_back(analyze_view(latent.value(), k_, seed, config_.kmeans_max_iters,
                                              config_.silhouette));
        log.silhouettes.push_back(graph.clusters.back().view_silhouette);
    }

    const LossWeights weights = config_.effective_weights();
    const ObjectiveOptions options = config_.objective_options();
    ObjectiveTerms terms;
    log.reliable = select_reliable_view(std::span<const double>(log.silhouettes));
    if (config_.mode == Mode::RG) {
        terms = total_loss_rg(graph, log.reliable, weights, options);
    } else {
        if (config_.one_hot_guidance) {
            log.weights = Matrix::Zero(static_cast<Index>(views), static_cast<Index>(views));
            log.weights.col(static_cast<Index>(log.reliable)).setOnes();
        } else {
            log.weights = reliable_weights(log.silhouettes, weight_mode(config_.mode)).weights;
        }
        terms = total_loss_rgs(graph, log.weights, weights, options);
    }
    log.loss = terms.total.scalar();
    log.ae = terms.ae.scalar();
    log.align = terms.align.scalar();
    log.compact = terms.compact.scalar();

    tape.backward(terms.total);
    optimizer_.step(params_);
    return log;
}

EpochLog Trainer::train_epoch(int epoch) {
    const BatchPlan plan = make_batches(data_, config_.batch_size, k_, config_.seed, epoch);
    EpochLog log;
    log.epoch = epoch;
    log.silhouettes.assign(data_.view_count(), 0.0);
    for (std::size_t b = 0; b < plan.size(); ++b) {
        BatchLog batch;
        try {
            batch = train_batch(plan[b], epoch, b);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                               ": " + e.what());
        }
        log.loss += batch.loss;
        log.ae += batch.ae;
        log.align += batch.align;
        log.compact += batch.compact;
        for (std::size_t v = 0; v < batch.silhouettes.size(); ++v) log.silhouettes[v] += batch.silhouettes[v];
        log.batches.push_back(std::move(batch));
    }
    const double count = static_cast<double>(plan.size());
    log.loss /= count;
    log.ae /= count;
    log.align /= count;
    log.compact /= count;
    for (double& s : log.silhouettes) s /= count;
    return log;
}

FitResult fit(const ViewBundle& data, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch) {
    Trainer trainer(data, config);
    FitResult result;
    result.clusters = trainer.clusters();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        result.log.push_back(trainer.train_epoch(epoch));
        if (on_epoch) on_epoch(result.log.back());
    }
    result.models = std::move(trainer.models());
    return result;
}

std::vector<Matrix> extract_latents(std::span<const ViewAutoencoder> models, const ViewBundle& data) {
    if (models.size() != data.view_count()) {
        throw std::invalid_argument("extract_latents: one model per view required");
    }
    std::vector<Matrix> out;
    out.reserve(models.size());
    for (std::size_t v = 0; v < models.size(); ++v) out.push_back(models[v].encode(data.views[v]));
    return out;
}

std::vector<int> final_cluster(std::span<const Matrix> latents, int k, std::uint64_t seed, int max_iters) {
    if (latents.empty()) throw std::invalid_argument("final_cluster: no latents");
    Index rows = 0;
    for (const Matrix& z : latents) {
        if (z.cols() != latents.front().cols()) {
            throw ShapeError("final_cluster: latent widths differ across views");
        }
        rows += z.rows();
    }
    if (k > rows) throw std::invalid_argument("final_cluster: K exceeds sample count");
    Matrix stacked(rows, latents.front().cols());
    Index at = 0;
    for (const Matrix& z : latents) {
        stacked.middleRows(at, z.rows()) = z;
        at += z.rows();
    }
    return kmeans(stacked, k, derive_seed({seed, kFinalTag}), max_iters).assignments;
}

}  // namespace umc
