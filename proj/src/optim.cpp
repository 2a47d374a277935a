#include "umc/optim.hpp"

#include <cmath>

namespace umc {

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam" || s == "adaptive-moments") return OptimizerKind::adam;
    if (s == "sgd" || s == "sgd-momentum") return OptimizerKind::sgd_momentum;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void Optimizer::step(std::span<ad::Parameter* const> params) {
    ++steps_;
    const auto& s = settings_;
    if (s.kind == OptimizerKind::adam) {
        const double t = static_cast<double>(steps_);
        const double c1 = 1.0 - std::pow(s.beta1, t);
        const double c2 = 1.0 - std::pow(s.beta2, t);
        for (ad::Parameter* p : params) {
            auto m = p->first_moment_mut();
            auto v = p->second_moment_mut();
            const auto& g = p->grad();
            m = s.beta1 * m + (1.0 - s.beta1) * g;
            v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
            p->value_mut().array() -=
                s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
            p->zero_grad();
        }
    } else {
        for (ad::Parameter* p : params) {
            auto m = p->first_moment_mut();
            m = s.momentum * m + p->grad();
            p->value_mut() -= s.learning_rate * m;
            p->zero_grad();
        }
    }
    for (ad::Parameter* p : params) require_finite(p->value(), "optimizer step");
}

}  // namespace umc
