#pragma once

#include "umc/autodiff.hpp"
#include "umc/cluster.hpp"
#include "umc/model.hpp"

#include <span>
#include <vector>

namespace umc {

/// Column means of softmax latent rows: a 1 x latent_dim categorical distribution
/// over over-cluster classes for the whole batch.
ad::Var view_distribution(ad::Var latent);

/// sum_i p_i ln(p_i / q_i) in nats, with both arguments floored at ad::kLogFloor
/// inside the log (so 0 ln 0 contributes 0).
ad::Var kl_categorical(ad::Var p, ad::Var q);

/// Whether gradients reach the guiding distribution Q^r.
enum class TeacherGradient { flow, stop };

/// (1/V) sum_v KL(P^v || Q^r).
ad::Var align_loss_one(std::span<const ad::Var> distributions, std::size_t reliable,
                       TeacherGradient teacher = TeacherGradient::flow);

/// sum_v sum_r (w_vr / V^2) KL(P^v || Q^r); zero weights are skipped.
ad::Var align_loss_multi(std::span<const ad::Var> distributions, const Matrix& weights,
                         TeacherGradient teacher = TeacherGradient::flow);

enum class CompactnessForm {
    reciprocal,  ///< sum of 1 / (C-bar + eps)
    direct,      ///< sum of C-bar
};

/// (1/(V K)) sum_v sum_k 1 / (C-bar_k^v + eps) over occupied clusters. Centroids and
/// assignments are constants; gradients flow through the latent rows.
ad::Var compactness_loss(std::span<const ad::Var> latents,
                         std::span<const ClusterState<double>> clusters, double epsilon = 1e-6,
                         CompactnessForm form = CompactnessForm::reciprocal);

struct LossWeights {
    double lambda1 = 0.1;   ///< orthogonality
    double lambda2 = 1.0;   ///< alignment
    double lambda3 = 0.01;  ///< compactness
};

struct ObjectiveOptions {
    OrthOptions orth;
    TeacherGradient teacher = TeacherGradient::flow;
    CompactnessForm compactness = CompactnessForm::reciprocal;
    double epsilon = 1e-6;
};

/// Everything one mini-batch contributes to the objective.
struct BatchGraph {
    std::vector<ViewTerms> views;
    std::vector<ClusterState<double>> clusters;
};

struct ObjectiveTerms {
    ad::Var ae;
    ad::Var align;
    ad::Var compact;
    ad::Var total;
};

/// ae + lambda2 * align + lambda3 * compact. A zero weight drops its term from the
/// graph entirely.
ad::Var combine_objective(ad::Var ae, ad::Var align, ad::Var compact, double lambda2,
                          double lambda3);

/// One guiding view.
ObjectiveTerms total_loss_rg(const BatchGraph& batch, std::size_t reliable,
                             const LossWeights& weights, const ObjectiveOptions& options = {});

/// Weighted set of guiding views.
ObjectiveTerms total_loss_rgs(const BatchGraph& batch, const Matrix& view_weights,
                              const LossWeights& weights, const ObjectiveOptions& options = {});

}  // namespace umc
