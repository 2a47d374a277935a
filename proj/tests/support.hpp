#pragma once

#include "umc/tensor.hpp"

#include <random>
#include <vector>

namespace test {

inline umc::Matrix random_matrix(std::mt19937_64& rng, umc::Index rows, umc::Index cols,
                                 double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    umc::Matrix m(rows, cols);
    for (umc::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

// Entries with |x| in [gap, 1]; keeps relu and friends away from their kink.
inline umc::Matrix away_from_zero(std::mt19937_64& rng, umc::Index rows, umc::Index cols,
                                  double gap = 0.1) {
    std::uniform_real_distribution<double> u(gap, 1.0);
    std::bernoulli_distribution sign(0.5);
    umc::Matrix m(rows, cols);
    for (umc::Index i = 0; i < m.size(); ++i) m.data()[i] = sign(rng) ? u(rng) : -u(rng);
    return m;
}

inline umc::Matrix softmax_rows(umc::Matrix x) {
    for (umc::Index i = 0; i < x.rows(); ++i) {
        x.row(i) = (x.row(i).array() - x.row(i).maxCoeff()).exp().matrix();
        x.row(i) /= x.row(i).sum();
    }
    return x;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
    std::uniform_int_distribution<int> u(0, k - 1);
    std::vector<int> out(n);
    for (int& v : out) v = u(rng);
    return out;
}

}  // namespace test
