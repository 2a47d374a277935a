#pragma once

#include "umc/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace umc {

/// A multi-view dataset. In an unpaired bundle each original sample lives in exactly
/// one view; in a paired bundle every view has the same rows in the same order.
struct ViewBundle {
    std::string name;
    int clusters = 0;                          ///< K
    std::vector<Matrix> views;                 ///< X^v, n^v x d^v
    std::vector<std::vector<int>> labels;      ///< ground truth per view, in [0, K)
    std::optional<std::uint64_t> unpair_seed;  ///< set once unpaired
    /// Row of the paired source each sample came from; empty when unknown.
    std::vector<std::vector<Index>> source_rows;

    std::size_t view_count() const { return views.size(); }
    Index total_samples() const;
    /// Labels of all views stacked in view-major order.
    std::vector<int> stacked_labels() const;
    /// Throws DataError when shapes, label counts or label ranges are inconsistent.
    void validate() const;
};

struct LoadOptions {
    bool standardize = true;
};

/// Reads `manifest.json` plus the per-view feature and label CSVs it names.
ViewBundle load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes CSVs with 17 significant digits and a manifest; creates `dir` if needed.
void save_dataset(const ViewBundle& bundle, const std::filesystem::path& dir);

/// FNV-1a over the manifest and every file it lists, as 16 hex digits.
std::string dataset_hash(const std::filesystem::path& dir);

/// Zero mean, unit (population) variance per column; constant columns become zero.
void standardize_columns(Matrix& x);

/// Seeded disjoint partition of a paired bundle: each row survives in exactly one
/// view, groups differ in size by at most one.
ViewBundle unpair(const ViewBundle& paired, std::uint64_t seed);

/// Ground-truth generator: Gaussian clusters around scaled simplex vertices, seen
/// through a random linear map per view (optionally tanh) plus Gaussian noise.
struct SynthSpec {
    int clusters = 5;
    int views = 3;
    int per_cluster = 200;
    int latent_dim = 0;          ///< generative dimension; 0 means `clusters`
    std::vector<Index> dims;     ///< per-view feature width; empty means 20, 30, 40, ...
    std::vector<double> noise;   ///< per-view sigma; empty means 0
    double separation = 10.0;    ///< distance between cluster means
    bool nonlinear = false;
    std::uint64_t seed = 0;
    std::string name = "synth";
};

/// Paired bundle; pass through unpair() for an unpaired instance.
ViewBundle synth_generate(const SynthSpec& spec);

Matrix read_matrix_csv(const std::filesystem::path& path);
std::vector<int> read_labels_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);

}  // namespace umc
