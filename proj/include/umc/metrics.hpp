#pragma once

#include "umc/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace umc::metrics {

enum class NmiNormalization { geometric, arithmetic };

/// Counts of (true class, predicted cluster) pairs after relabeling both sides to
/// dense ids in increasing order of the original id.
struct Contingency {
    MatrixX<long> counts;  ///< classes x clusters
    long total = 0;
};

Contingency contingency(std::span<const int> truth, std::span<const int> pred);

/// Mutual information over the geometric (default) or arithmetic mean of the two
/// entropies. Two single-cluster partitions score 1; if exactly one partition has
/// zero entropy the score is 0.
double nmi(std::span<const int> truth, std::span<const int> pred,
           NmiNormalization norm = NmiNormalization::geometric);

/// Fraction of samples correct under the best one-to-one cluster-to-class map.
double accuracy_hungarian(std::span<const int> truth, std::span<const int> pred);

struct PairScores {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Pair-counting scores over all unordered sample pairs. A pair is positive when
/// both samples share a predicted cluster; it is correct when they also share a
/// class. Empty denominators give 0.
PairScores pairwise_f1_precision(std::span<const int> truth, std::span<const int> pred);

/// Maximum-weight perfect matching on a square or rectangular profit matrix.
/// Returns, for each row, the matched column (or -1 when rows > cols).
std::vector<int> max_weight_assignment(const MatrixX<double>& profit);

struct Scores {
    double nmi = 0.0;
    double acc = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
};

Scores evaluate(std::span<const int> truth, std::span<const int> pred,
                NmiNormalization norm = NmiNormalization::geometric);

}  // namespace umc::metrics
