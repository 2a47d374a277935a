#include "umc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace umc::metrics {

namespace {

void check_lengths(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size()) {
        throw std::invalid_argument("label length mismatch: " + std::to_string(truth.size()) +
                                    " vs " + std::to_string(pred.size()));
    }
}

std::vector<int> densify(std::span<const int> labels, int& count) {
    std::map<int, int> ids;
    for (int l : labels) {
        if (l < 0) throw std::invalid_argument("labels must be non-negative");
        ids.emplace(l, 0);
    }
    int next = 0;
    for (auto& [label, id] : ids) id = next++;
    count = next;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(ids.at(l));
    return out;
}

double entropy(const Eigen::Matrix<long, Eigen::Dynamic, 1>& marginal, double n) {
    double h = 0.0;
    for (Index i = 0; i < marginal.size(); ++i) {
        if (marginal(i) == 0) continue;
        const double p = static_cast<double>(marginal(i)) / n;
        h -= p * std::log(p);
    }
    return h;
}

double pairs(long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

Contingency contingency(std::span<const int> truth, std::span<const int> pred) {
    check_lengths(truth, pred);
    int classes = 0;
    int clusters = 0;
    const auto t = densify(truth, classes);
    const auto p = densify(pred, clusters);
    Contingency c;
    c.counts = MatrixX<long>::Zero(classes, clusters);
    for (std::size_t i = 0; i < t.size(); ++i) ++c.counts(t[i], p[i]);
    c.total = static_cast<long>(t.size());
    return c;
}

double nmi(std::span<const int> truth, std::span<const int> pred, NmiNormalization norm) {
    if (truth.empty()) throw std::invalid_argument("nmi: empty labels");
    const Contingency c = contingency(truth, pred);
    const double n = static_cast<double>(c.total);
    const Eigen::Matrix<long, Eigen::Dynamic, 1> a = c.counts.rowwise().sum();
    const Eigen::Matrix<long, Eigen::Dynamic, 1> b = c.counts.colwise().sum().transpose();
    const double hu = entropy(a, n);
    const double hv = entropy(b, n);
    if (hu == 0.0 && hv == 0.0) return 1.0;
    if (hu == 0.0 || hv == 0.0) return 0.0;

    double mi = 0.0;
    for (Index i = 0; i < c.counts.rows(); ++i) {
        for (Index j = 0; j < c.counts.cols(); ++j) {
            const long nij = c.counts(i, j);
            if (nij == 0) continue;
            mi += (static_cast<double>(nij) / n) *
                  std::log(n * static_cast<double>(nij) /
                           (static_cast<double>(a(i)) * static_cast<double>(b(j))));
        }
    }
    const double denom = norm == NmiNormalization::geometric ? std::sqrt(hu * hv) : 0.5 * (hu + hv);
    return std::clamp(mi / denom, 0.0, 1.0);
}

std::vector<int> max_weight_assignment(const MatrixX<double>& profit) {
    // Shortest augmenting path Hungarian method on a square cost matrix, O(n^3).
    const Index rows = profit.rows();
    const Index cols = profit.cols();
    const Index n = std::max(rows, cols);
    const double top = profit.size() ? profit.maxCoeff() : 0.0;
    MatrixX<double> cost = MatrixX<double>::Constant(n, n, top);
    cost.topLeftCorner(rows, cols) = (top - profit.array()).matrix();

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> match(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        match[0] = i;
        Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Index i0 = match[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> assignment(static_cast<std::size_t>(rows), -1);
    for (Index j = 1; j <= n; ++j) {
        const Index i = match[j] - 1;
        if (i < rows && j - 1 < cols) assignment[i] = static_cast<int>(j - 1);
    }
    return assignment;
}

double accuracy_hungarian(std::span<const int> truth, std::span<const int> pred) {
    if (truth.empty()) throw std::invalid_argument("accuracy: empty labels");
    const Contingency c = contingency(truth, pred);
    // Rows are clusters so every cluster maps to at most one class.
    const MatrixX<double> profit = c.counts.transpose().cast<double>();
    const auto match = max_weight_assignment(profit);
    long correct = 0;
    for (std::size_t k = 0; k < match.size(); ++k) {
        if (match[k] >= 0) correct += c.counts(match[k], static_cast<Index>(k));
    }
    return static_cast<double>(correct) / static_cast<double>(c.total);
}

PairScores pairwise_f1_precision(std::span<const int> truth, std::span<const int> pred) {
    const Contingency c = contingency(truth, pred);
    if (c.total < 2) throw std::invalid_argument("pairwise scores need at least two samples");
    double tp = 0.0;
    for (Index i = 0; i < c.counts.size(); ++i) tp += pairs(c.counts.data()[i]);
    double pred_same = 0.0;
    double truth_same = 0.0;
    const Eigen::Matrix<long, 1, Eigen::Dynamic> b = c.counts.colwise().sum();
    const Eigen::Matrix<long, Eigen::Dynamic, 1> a = c.counts.rowwise().sum();
    for (Index j = 0; j < b.size(); ++j) pred_same += pairs(b(j));
    for (Index i = 0; i < a.size(); ++i) truth_same += pairs(a(i));

    PairScores s;
    s.precision = pred_same > 0.0 ? tp / pred_same : 0.0;
    s.recall = truth_same > 0.0 ? tp / truth_same : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

Scores evaluate(std::span<const int> truth, std::span<const int> pred, NmiNormalization norm) {
    Scores s;
    s.nmi = nmi(truth, pred, norm);
    s.acc = accuracy_hungarian(truth, pred);
    if (truth.size() >= 2) {
        const PairScores p = pairwise_f1_precision(truth, pred);
        s.f1 = p.f1;
        s.precision = p.precision;
    }
    return s;
}

}  // namespace umc::metrics
