#pragma once

#include "umc/cluster.hpp"
#include "umc/data.hpp"
#include "umc/losses.hpp"
#include "umc/model.hpp"
#include "umc/optim.hpp"

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace umc {

/// Guidance strategy. RG aligns every view to the single most reliable view; the
/// other modes align to all views at least as reliable, with sigmoid, uniform or
/// normalized weights.
enum class Mode { RG, RGs, URGs, NRGs };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
    std::string dataset;
    Mode mode = Mode::RGs;
    LossWeights weights;
    // Ablation switches; a disabled term behaves as if its lambda were 0.
    bool use_orth = true;
    bool use_compactness = true;
    bool use_alignment = true;

    int epochs = 50;
    int batch_size = 256;  ///< total across views
    Index latent_dim = 128;
    std::vector<Index> hidden{1024, 1024, 1024};
    int clusters = 0;  ///< K; 0 takes the dataset's value
    OptimizerSettings optimizer;
    std::uint64_t seed = 0;
    double epsilon = 1e-6;
    int kmeans_max_iters = 50;
    int final_kmeans_max_iters = 300;

    OrthOptions orth;
    SilhouetteDistance silhouette = SilhouetteDistance::squared;
    TeacherGradient teacher = TeacherGradient::flow;
    CompactnessForm compactness = CompactnessForm::reciprocal;
    bool standardize = true;
    bool save_checkpoint = true;
    /// Diagnostic: in the multi-view modes, replace the weight matrix by a one-hot
    /// column on the most reliable view.
    bool one_hot_guidance = false;

    LossWeights effective_weights() const;
    ObjectiveOptions objective_options() const;
    /// Throws ConfigError on invalid values. `views` and `k` are the dataset's.
    void validate(std::size_t views, int k) const;
};

struct BatchLog {
    std::vector<double> silhouettes;
    std::size_t reliable = 0;
    Matrix weights;  ///< V x V; empty in RG mode
    double loss = 0.0;
    double ae = 0.0;
    double align = 0.0;
    double compact = 0.0;
};

struct EpochLog {
    int epoch = 0;
    // Means over the epoch's batches.
    double loss = 0.0;
    double ae = 0.0;
    double align = 0.0;
    double compact = 0.0;
    std::vector<double> silhouettes;
    std::vector<BatchLog> batches;
};

/// Per batch, per view: indices into that view's rows.
using BatchPlan = std::vector<std::vector<std::vector<Index>>>;

/// ceil(N / batch_size) batches. View v contributes about batch_size * n^v / N
/// shuffled rows to each batch and every row appears exactly once per epoch. When
/// the proportional split would leave a view with fewer than `k` rows in some
/// batch, that view is split evenly instead.
BatchPlan make_batches(const ViewBundle& data, int batch_size, int k, std::uint64_t seed,
                       int epoch);

/// Deterministic 64-bit seed from a list of integers (splitmix64 chain).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

class Trainer {
public:
    /// `data` must outlive the trainer.
    Trainer(const ViewBundle& data, TrainConfig config);

    /// One pass over the data. Epochs are numbered from 1.
    EpochLog train_epoch(int epoch);

    std::vector<ViewAutoencoder>& models() { return models_; }
    const std::vector<ViewAutoencoder>& models() const { return models_; }
    const TrainConfig& config() const { return config_; }
    int clusters() const { return k_; }

private:
    BatchLog train_batch(const std::vector<std::vector<Index>>& batch, int epoch, std::size_t index);

    const ViewBundle& data_;
    TrainConfig config_;
    int k_ = 0;
    std::vector<ViewAutoencoder> models_;
    std::vector<ad::Parameter*> params_;
    Optimizer optimizer_;
};

struct FitResult {
    std::vector<ViewAutoencoder> models;
    std::vector<EpochLog> log;
    int clusters = 0;
};

FitResult fit(const ViewBundle& data, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch = {});

/// Full-data forward pass per view, no recording.
std::vector<Matrix> extract_latents(std::span<const ViewAutoencoder> models, const ViewBundle& data);

/// K-means on the row-stacked latents [Z^1; ...; Z^V]; output follows that order.
std::vector<int> final_cluster(std::span<const Matrix> latents, int k, std::uint64_t seed,
                               int max_iters = 300);

}  // namespace umc
