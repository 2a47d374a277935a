#include "umc/cluster.hpp"

namespace umc {

std::string to_string(WeightMode m) {
    switch (m) {
    case WeightMode::sigmoid: return "sigmoid";
    case WeightMode::uniform: return "uniform";
    case WeightMode::normalized: return "normalized";
    }
    return "sigmoid";
}

WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "sigmoid") return WeightMode::sigmoid;
    if (s == "uniform") return WeightMode::uniform;
    if (s == "normalized") return WeightMode::normalized;
    throw std::invalid_argument("unknown weight mode '" + s + "'");
}

ReliableWeights reliable_weights(std::span<const double> sils, WeightMode mode) {
    const std::size_t views = sils.size();
    if (views == 0) throw std::invalid_argument("reliable_weights: no views");
    ReliableWeights out;
    out.mode = mode;
    out.reliable = select_reliable_view(sils);
    out.weights = Matrix::Zero(static_cast<Index>(views), static_cast<Index>(views));

    for (std::size_t v = 0; v < views; ++v) {
        double denom = 0.0;
        for (std::size_t r = 0; r < views; ++r) {
            if (sils[r] < sils[v]) continue;
            denom += mode == WeightMode::sigmoid ? logistic(sils[r]) : sils[r];
        }
        if (mode == WeightMode::normalized && denom == 0.0) {
            throw NumericError("normalized weights: silhouettes over the reliable set of view " +
                               std::to_string(v + 1) + " sum to zero");
        }
        for (std::size_t r = 0; r < views; ++r) {
            if (sils[r] < sils[v]) continue;
            double w = 1.0;
            if (mode == WeightMode::sigmoid) w = logistic(sils[r]) / denom;
            if (mode == WeightMode::normalized) w = sils[r] / denom;
            out.weights(static_cast<Index>(v), static_cast<Index>(r)) = w;
        }
    }
    return out;
}

}  // namespace umc
