#pragma once

#include "umc/autodiff.hpp"

#include <span>
#include <string>

namespace umc {

enum class OptimizerKind { adam, sgd_momentum };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double momentum = 0.9;
};

/// First-order update over a fixed parameter set. Moment buffers live in the
/// parameters themselves.
class Optimizer {
public:
    explicit Optimizer(OptimizerSettings settings) : settings_(settings) {}

    /// Applies one update from the current gradients, then zeroes them.
    void step(std::span<ad::Parameter* const> params);
    long steps_taken() const { return steps_; }
    const OptimizerSettings& settings() const { return settings_; }

private:
    OptimizerSettings settings_;
    long steps_ = 0;
};

}  // namespace umc
