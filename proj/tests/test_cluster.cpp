#include "oracles.hpp"
#include "support.hpp"
#include "umc/cluster.hpp"

#include "doctest.h"

#include <numeric>

using namespace umc;
using doctest::Approx;

namespace {

Matrix column(std::initializer_list<double> xs) {
    Matrix m(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

// Minimum within-cluster SSE over every 2-partition, by enumeration.
double best_two_partition_sse(const Matrix& z) {
    const Index n = z.rows();
    double best = INFINITY;
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<int> a(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) a[i] = (mask >> i) & 1;
        double total = 0;
        for (int c = 0; c < 2; ++c) {
            RowVector mean = RowVector::Zero(z.cols());
            int count = 0;
            for (Index i = 0; i < n; ++i) {
                if (a[i] == c) mean += z.row(i), ++count;
            }
            mean /= count;
            for (Index i = 0; i < n; ++i) {
                if (a[i] == c) total += (z.row(i) - mean).squaredNorm();
            }
        }
        best = std::min(best, total);
    }
    return best;
}

}  // namespace

TEST_CASE("kmeans examples") {
    const Matrix z = (Matrix(4, 2) << 0, 0, 0.1, 0, 10, 10, 10.1, 10).finished();
    const auto s = kmeans(z, 2, 1);
    CHECK(s.assignments[0] == s.assignments[1]);
    CHECK(s.assignments[2] == s.assignments[3]);
    CHECK(s.assignments[0] != s.assignments[2]);
    CHECK(within_cluster_sse(z, std::span<const int>(s.assignments), s.centroids) == Approx(best_two_partition_sse(z)));
    CHECK(s.cluster_sizes == std::vector<Index>{2, 2});

    const auto one = kmeans(z, 1, 1);
    CHECK(one.centroids.row(0).isApprox(z.colwise().mean()));

    const Matrix dup = (Matrix(6, 1) << 1, 1, 5, 5, 9, 9).finished();
    const auto d = kmeans(dup, 3, 4);
    CHECK(within_cluster_sse(dup, std::span<const int>(d.assignments), d.centroids) == 0.0);

    CHECK_THROWS_AS(kmeans(z, 5, 0), std::invalid_argument);
}

TEST_CASE("kmeans is seeded and its SSE never increases") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix z = test::random_matrix(rng, 60, 3);
        const auto a = kmeans(z, 4, trial);
        const auto b = kmeans(z, 4, trial);
        CHECK(a.assignments == b.assignments);
        for (std::size_t i = 1; i < a.sse_history.size(); ++i) {
            CHECK(a.sse_history[i] <= a.sse_history[i - 1] + 1e-12);
        }
        for (Index size : a.cluster_sizes) CHECK(size > 0);
    }
}

TEST_CASE("silhouette examples") {
    const Matrix z = column({0, 0.2, 10});
    const std::vector<int> a{0, 0, 1};
    const Vector s = silhouette_samples(z, a);
    CHECK(s(0) == Approx(0.9996).epsilon(1e-12));
    CHECK(s(1) == Approx(96.0 / 96.04).epsilon(1e-12));
    CHECK(s(2) == 0.0);
    CHECK(view_silhouette(s) == Approx(0.66639).epsilon(1e-5));

    CHECK(silhouette_samples(z, std::vector<int>{0, 0, 0}).isZero());
    const Matrix pairs = column({0, 0, 50, 50});
    CHECK(silhouette_samples(pairs, std::vector<int>{0, 0, 1, 1}) == Vector::Ones(4));

    // Unsquared distances: a = 0.2, b = 10 and 9.8.
    const Vector e = silhouette_samples(z, a, SilhouetteDistance::euclidean);
    CHECK(e(0) == Approx(0.98));
    CHECK_THROWS_AS(silhouette_samples(z, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("silhouette matches the oracle and is label/order invariant") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> size(2, 60), clusters(2, 6);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = size(rng), k = clusters(rng);
        const Matrix z = test::random_matrix(rng, n, 3);
        const auto labels = test::random_labels(rng, static_cast<std::size_t>(n), k);
        const Vector s = silhouette_samples(z, labels);
        const auto o = oracle::silhouette(z, labels);
        for (int i = 0; i < n; ++i) CHECK(std::abs(s(i) - o[i]) <= 1e-12);

        std::vector<int> relabeled(labels);
        for (int& l : relabeled) l = (l * 5 + 3) % 7;  // injective on 0..5
        CHECK((silhouette_samples(z, relabeled) - s).cwiseAbs().maxCoeff() <= 1e-12);

        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix zp(n, 3);
        std::vector<int> lp(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) zp.row(i) = z.row(perm[i]), lp[i] = labels[perm[i]];
        const Vector sp = silhouette_samples(zp, lp);
        for (int i = 0; i < n; ++i) CHECK(std::abs(sp(i) - s(perm[i])) <= 1e-12);
    }
}

TEST_CASE("view silhouette and reliable view") {
    CHECK(view_silhouette(Vector::Zero(4)) == 0.0);
    CHECK(view_silhouette(Vector::Constant(3, 0.25)) == Approx(0.25));
    CHECK_THROWS_AS(view_silhouette(Vector(0)), std::invalid_argument);

    const std::vector<double> s{0.6, 0.3, -0.2};
    CHECK(select_reliable_view(std::span<const double>(s)) == 0);
    const std::vector<double> tie{0.5, 0.5};
    CHECK(select_reliable_view(std::span<const double>(tie)) == 0);
    const std::vector<double> single{-0.4};
    CHECK(select_reliable_view(std::span<const double>(single)) == 0);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix r = test::random_matrix(rng, 1, 5);
        std::vector<double> a(r.data(), r.data() + 5), b(a);
        for (double& x : b) x = std::exp(3 * x) - 7;  // strictly increasing
        CHECK(select_reliable_view(std::span<const double>(a)) ==
              select_reliable_view(std::span<const double>(b)));
    }
}

TEST_CASE("reliable weights examples") {
    const std::vector<double> s{0.6, 0.3, -0.2};
    const auto sig = reliable_weights(s, WeightMode::sigmoid);
    CHECK(sig.reliable == 0);
    const Matrix& w = sig.weights;
    CHECK(w(2, 0) == Approx(0.38656).epsilon(1e-5));
    CHECK(w(2, 1) == Approx(0.34392).epsilon(1e-5));
    CHECK(w(2, 2) == Approx(0.26952).epsilon(1e-5));
    CHECK(w(1, 0) == Approx(0.52919).epsilon(1e-5));
    CHECK(w(1, 1) == Approx(0.47081).epsilon(1e-5));
    CHECK(w(1, 2) == 0.0);
    CHECK(w.row(0) == (RowVector(3) << 1, 0, 0).finished());

    const auto uni = reliable_weights(s, WeightMode::uniform).weights;
    CHECK(uni.row(2) == (RowVector(3) << 1, 1, 1).finished());
    CHECK(uni.row(0) == (RowVector(3) << 1, 0, 0).finished());

    const std::vector<double> pos{0.6, 0.3, 0.1};
    const auto norm = reliable_weights(pos, WeightMode::normalized).weights;
    CHECK(norm(2, 0) == Approx(0.6));
    CHECK(norm(2, 1) == Approx(0.3));
    CHECK(norm(2, 2) == Approx(0.1));

    const std::vector<double> cancel{0.2, -0.2};
    CHECK_THROWS_AS(reliable_weights(cancel, WeightMode::normalized), NumericError);
    CHECK(weight_mode_from_string("uniform") == WeightMode::uniform);
}

TEST_CASE("sigmoid rows are non-increasing along descending silhouettes") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix r = test::random_matrix(rng, 1, 6);
        std::vector<double> s(r.data(), r.data() + 6);
        const Matrix w = reliable_weights(s, WeightMode::sigmoid).weights;
        std::vector<std::size_t> order(6);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
        for (Index v = 0; v < 6; ++v) {
            CHECK(w.row(v).sum() == Approx(1.0).epsilon(1e-12));
            CHECK(w.row(v).minCoeff() >= 0.0);
            for (std::size_t i = 1; i < order.size(); ++i) {
                CHECK(w(v, static_cast<Index>(order[i])) <= w(v, static_cast<Index>(order[i - 1])) + 1e-15);
            }
        }
    }
}

TEST_CASE("cluster mean distances") {
    ClusterState<double> state;
    state.assignments = {0, 0};
    state.centroids = Matrix::Constant(1, 1, 1.0);
    CHECK(cluster_mean_distances(column({0, 2}), state) == std::vector<double>{1.0});
    CHECK(cluster_mean_distances(column({1, 1}), state) == std::vector<double>{0.0});
    state.assignments = {0};
    CHECK(cluster_mean_distances(column({4}), state) == std::vector<double>{3.0});
}

TEST_CASE("analyze_view fills every field") {
    std::mt19937_64 rng(1);
    const Matrix z = test::random_matrix(rng, 40, 4);
    const auto s = analyze_view(z, 3, 7);
    CHECK(s.assignments.size() == 40);
    CHECK(s.mean_dist.size() == 3);
    CHECK(s.view_silhouette >= -1.0);
    CHECK(s.view_silhouette <= 1.0);
    CHECK(std::accumulate(s.cluster_sizes.begin(), s.cluster_sizes.end(), Index{0}) == 40);
}
