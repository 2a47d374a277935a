#pragma once

#include "umc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace umc {

/// Per-view clustering of a latent batch.
template <typename Scalar>
struct ClusterState {
    std::vector<int> assignments;        ///< cluster id per row
    MatrixX<Scalar> centroids;           ///< K x latent_dim
    std::vector<Index> cluster_sizes;    ///< |Omega_k|
    std::vector<Scalar> mean_dist;       ///< mean Euclidean distance to the centroid, per cluster
    Scalar view_silhouette = Scalar(0);  ///< mean per-sample silhouette
    std::vector<Scalar> sse_history;     ///< within-cluster SSE after each assignment step
    int iterations = 0;

    int clusters() const { return static_cast<int>(centroids.rows()); }
};

namespace detail {

template <typename Derived>
using ScalarOf = typename Derived::Scalar;

template <typename Derived, typename CDerived>
ScalarOf<Derived> row_sq_dist(const Eigen::MatrixBase<Derived>& a, Index i,
                              const Eigen::MatrixBase<CDerived>& b, Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

/// Nearest centroid, ties to the lowest index.
template <typename Derived, typename CDerived>
int nearest(const Eigen::MatrixBase<Derived>& data, Index i,
            const Eigen::MatrixBase<CDerived>& centroids, ScalarOf<Derived>* best_dist = nullptr) {
    using Scalar = ScalarOf<Derived>;
    int best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Index k = 0; k < centroids.rows(); ++k) {
        const Scalar d = row_sq_dist(data, i, centroids, k);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    if (best_dist) *best_dist = best_d;
    return best;
}

}  // namespace detail

/// k-means++ seeding: first centre uniform, later centres drawn with probability
/// proportional to squared distance from the nearest chosen centre.
template <typename Derived>
MatrixX<typename Derived::Scalar> kmeanspp_seeds(const Eigen::MatrixBase<Derived>& data, int k,
                                                 std::mt19937_64& rng) {
    using Scalar = typename Derived::Scalar;
    const Index n = data.rows();
    MatrixX<Scalar> centroids(k, data.cols());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);
    std::uniform_int_distribution<Index> first(0, n - 1);
    Index pick = first(rng);
    centroids.row(0) = data.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;

    std::vector<Scalar> d2(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) d2[i] = detail::row_sq_dist(data, i, centroids, 0);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double run = 0.0;
            pick = -1;
            for (Index i = 0; i < n; ++i) {
                if (d2[i] <= Scalar(0)) continue;
                run += static_cast<double>(d2[i]);
                pick = i;
                if (run >= target) break;
            }
        } else {
            // Every remaining point coincides with a centre.
            pick = static_cast<Index>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
        }
        centroids.row(c) = data.row(pick);
        chosen[static_cast<std::size_t>(pick)] = 1;
        for (Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], detail::row_sq_dist(data, i, centroids, c));
        }
    }
    return centroids;
}

/// Lloyd's algorithm from k-means++ seeds. Stops when assignments repeat or after
/// `max_iters` assignment steps. A cluster that empties is re-seeded with the
/// point farthest from its centroid.
template <typename Derived>
ClusterState<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& data, int k,
                                              std::uint64_t seed, int max_iters = 50) {
    using Scalar = typename Derived::Scalar;
    const Index n = data.rows();
    if (k < 1) throw std::invalid_argument("kmeans: K must be >= 1");
    if (n < k) {
        throw std::invalid_argument("kmeans: " + std::to_string(n) + " rows for K=" +
                                    std::to_string(k));
    }
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

    std::mt19937_64 rng(seed);
    ClusterState<Scalar> state;
    state.centroids = kmeanspp_seeds(data, k, rng);
    state.assignments.assign(static_cast<std::size_t>(n), -1);
    std::vector<Scalar> dist(static_cast<std::size_t>(n));

    auto update_centroids = [&]() {
        MatrixX<Scalar> sums = MatrixX<Scalar>::Zero(k, data.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(state.assignments[i]) += data.row(i);
            ++counts[state.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                state.centroids.row(c) = sums.row(c) / static_cast<Scalar>(counts[c]);
                continue;
            }
            // Re-seed: farthest point among clusters that can spare one.
            Index far = -1;
            Scalar far_d = Scalar(-1);
            for (Index i = 0; i < n; ++i) {
                if (counts[state.assignments[i]] < 2) continue;
                const Scalar d = detail::row_sq_dist(data, i, state.centroids, state.assignments[i]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            const int from = state.assignments[far];
            --counts[from];
            sums.row(from) -= data.row(far);
            state.centroids.row(from) = sums.row(from) / static_cast<Scalar>(counts[from]);
            state.assignments[far] = c;
            counts[c] = 1;
            sums.row(c) = data.row(far);
            state.centroids.row(c) = data.row(far);
        }
    };

    bool changed = true;
    for (int it = 0; it < max_iters && changed; ++it) {
        changed = false;
        Scalar sse = Scalar(0);
        for (Index i = 0; i < n; ++i) {
            const int c = detail::nearest(data, i, state.centroids, &dist[i]);
            if (c != state.assignments[i]) {
                state.assignments[i] = c;
                changed = true;
            }
            sse += dist[i];
        }
        state.sse_history.push_back(sse);
        ++state.iterations;
        if (changed) update_centroids();
    }

    state.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
    for (int a : state.assignments) ++state.cluster_sizes[a];
    return state;
}

/// Within-cluster sum of squared distances for the given assignment and centroids.
template <typename Derived, typename CDerived>
typename Derived::Scalar within_cluster_sse(const Eigen::MatrixBase<Derived>& data,
                                            std::span<const int> assignments,
                                            const Eigen::MatrixBase<CDerived>& centroids) {
    typename Derived::Scalar sse(0);
    for (Index i = 0; i < data.rows(); ++i) sse += detail::row_sq_dist(data, i, centroids, assignments[i]);
    return sse;
}

/// Pairwise dissimilarity used by the silhouette.
enum class SilhouetteDistance {
    squared,    ///< ||z_i - z_j||^2
    euclidean,  ///< ||z_i - z_j||
};

/// Per-sample silhouette (b - a) / max(a, b), where a is the mean dissimilarity to
/// the rest of the sample's cluster and b the smallest mean dissimilarity to another
/// cluster. Samples in singleton clusters score 0, and every sample scores 0 when
/// fewer than two clusters are occupied.
template <typename Derived>
VectorX<typename Derived::Scalar> silhouette_samples(
    const Eigen::MatrixBase<Derived>& z, std::span<const int> assignments,
    SilhouetteDistance distance = SilhouetteDistance::squared) {
    using Scalar = typename Derived::Scalar;
    const Index n = z.rows();
    if (static_cast<Index>(assignments.size()) != n) {
        throw std::invalid_argument("silhouette_samples: " + std::to_string(assignments.size()) +
                                    " assignments for " + std::to_string(n) + " rows");
    }
    VectorX<Scalar> sil = VectorX<Scalar>::Zero(n);
    if (n == 0) return sil;

    int labels = 0;
    for (int a : assignments) {
        if (a < 0) throw std::invalid_argument("silhouette_samples: negative cluster id");
        labels = std::max(labels, a + 1);
    }
    std::vector<Index> size(static_cast<std::size_t>(labels), 0);
    for (int a : assignments) ++size[a];
    if (std::count_if(size.begin(), size.end(), [](Index s) { return s > 0; }) < 2) return sil;

    std::vector<Scalar> sums(static_cast<std::size_t>(labels));
    for (Index i = 0; i < n; ++i) {
        const int own = assignments[i];
        if (size[own] < 2) continue;
        std::fill(sums.begin(), sums.end(), Scalar(0));
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            Scalar s = detail::row_sq_dist(z, i, z, j);
            if (distance == SilhouetteDistance::euclidean) s = std::sqrt(s);
            sums[assignments[j]] += s;
        }
        const Scalar a = sums[own] / static_cast<Scalar>(size[own] - 1);
        Scalar b = std::numeric_limits<Scalar>::infinity();
        for (int c = 0; c < labels; ++c) {
            if (c == own || size[c] == 0) continue;
            b = std::min(b, sums[c] / static_cast<Scalar>(size[c]));
        }
        const Scalar denom = std::max(a, b);
        sil(i) = denom > Scalar(0) ? (b - a) / denom : Scalar(0);
    }
    return sil;
}

/// Mean of per-sample silhouettes.
template <typename Scalar>
Scalar view_silhouette(std::span<const Scalar> sils) {
    if (sils.empty()) throw std::invalid_argument("view_silhouette: empty input");
    Scalar total(0);
    for (Scalar s : sils) total += s;
    return total / static_cast<Scalar>(sils.size());
}

template <typename Derived>
typename Derived::Scalar view_silhouette(const Eigen::MatrixBase<Derived>& sils) {
    if (sils.size() == 0) throw std::invalid_argument("view_silhouette: empty input");
    return sils.mean();
}

/// Index of the highest view silhouette; ties go to the lowest index.
template <typename Scalar>
std::size_t select_reliable_view(std::span<const Scalar> sils) {
    if (sils.empty()) throw std::invalid_argument("select_reliable_view: no views");
    return static_cast<std::size_t>(std::max_element(sils.begin(), sils.end()) - sils.begin());
}

enum class WeightMode {
    sigmoid,     ///< sigma(sils^r) normalized over the reliable set
    uniform,     ///< 1 for every reliable view
    normalized,  ///< sils^r normalized over the reliable set
};

std::string to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& s);

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

/// V x V guidance weights. Row v covers the reliable set {r : sils^r >= sils^v},
/// which always contains v itself.
struct ReliableWeights {
    WeightMode mode = WeightMode::sigmoid;
    Matrix weights;
    std::size_t reliable = 0;
};

ReliableWeights reliable_weights(std::span<const double> sils, WeightMode mode);

/// C-bar_k: mean Euclidean distance from a cluster's members to its centroid.
/// Empty clusters report 0.
template <typename Derived, typename Scalar>
std::vector<Scalar> cluster_mean_distances(const Eigen::MatrixBase<Derived>& z,
                                           const ClusterState<Scalar>& state) {
    if (static_cast<Index>(state.assignments.size()) != z.rows()) {
        throw std::invalid_argument("cluster_mean_distances: assignment count mismatch");
    }
    const int k = state.clusters();
    std::vector<Scalar> total(static_cast<std::size_t>(k), Scalar(0));
    std::vector<Index> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < z.rows(); ++i) {
        const int c = state.assignments[i];
        total[c] += (z.row(i) - state.centroids.row(c)).norm();
        ++count[c];
    }
    for (int c = 0; c < k; ++c) {
        if (count[c] > 0) total[c] /= static_cast<Scalar>(count[c]);
    }
    return total;
}

/// K-means, silhouette and mean distances for one view's batch.
template <typename Derived>
ClusterState<typename Derived::Scalar> analyze_view(
    const Eigen::MatrixBase<Derived>& z, int k, std::uint64_t seed, int max_iters = 50,
    SilhouetteDistance distance = SilhouetteDistance::squared) {
    auto state = kmeans(z, k, seed, max_iters);
    state.view_silhouette = view_silhouette(silhouette_samples(z, state.assignments, distance));
    state.mean_dist = cluster_mean_distances(z, state);
    return state;
}

}  // namespace umc
