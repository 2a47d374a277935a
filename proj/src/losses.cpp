#include "umc/losses.hpp"

#include <string>

namespace umc {

namespace {

ad::Var teacher(ad::Var q, TeacherGradient mode) {
    return mode == TeacherGradient::stop ? ad::stop_gradient(q) : q;
}

void check_weights(double lambda, const char* name) {
    if (lambda < 0.0) throw std::invalid_argument(std::string(name) + " must be >= 0");
}

std::vector<ad::Var> distributions_of(const BatchGraph& batch) {
    std::vector<ad::Var> out;
    out.reserve(batch.views.size());
    for (const ViewTerms& t : batch.views) out.push_back(view_distribution(t.latent));
    return out;
}

std::vector<ad::Var> latents_of(const BatchGraph& batch) {
    std::vector<ad::Var> out;
    out.reserve(batch.views.size());
    for (const ViewTerms& t : batch.views) out.push_back(t.latent);
    return out;
}

}  // namespace

ad::Var view_distribution(ad::Var latent) {
    if (latent.rows() == 0) throw std::invalid_argument("view_distribution: empty batch");
    return ad::scale(ad::sum_rows(latent), 1.0 / static_cast<double>(latent.rows()));
}

ad::Var kl_categorical(ad::Var p, ad::Var q) {
    if (!same_shape(p.value(), q.value())) {
        throw ShapeError("kl_categorical: " + shape_string(p.value()) + " vs " +
                         shape_string(q.value()));
    }
    return ad::sum_all(ad::multiply(p, ad::log(p) - ad::log(q)));
}

ad::Var align_loss_one(std::span<const ad::Var> distributions, std::size_t reliable,
                       TeacherGradient mode) {
    const std::size_t views = distributions.size();
    if (views == 0) throw std::invalid_argument("align_loss_one: no views");
    if (reliable >= views) throw std::out_of_range("align_loss_one: reliable view out of range");
    ad::Var q = teacher(distributions[reliable], mode);
    ad::Var total;
    for (const ad::Var& p : distributions) {
        ad::Var kl = kl_categorical(p, q);
        total = total.valid() ? total + kl : kl;
    }
    return ad::scale(total, 1.0 / static_cast<double>(views));
}

ad::Var align_loss_multi(std::span<const ad::Var> distributions, const Matrix& weights,
                         TeacherGradient mode) {
    const auto views = static_cast<Index>(distributions.size());
    if (views == 0) throw std::invalid_argument("align_loss_multi: no views");
    if (weights.rows() != views || weights.cols() != views) {
        throw ShapeError("align_loss_multi: weight matrix " + shape_string(weights) + " for " +
                         std::to_string(views) + " views");
    }
    ad::Tape& tape = distributions.front().tape();
    const double norm = 1.0 / static_cast<double>(views * views);
    ad::Var total;
    for (Index v = 0; v < views; ++v) {
        for (Index r = 0; r < views; ++r) {
            const double w = weights(v, r);
            if (w == 0.0) continue;
            ad::Var kl = ad::scale(kl_categorical(distributions[v], teacher(distributions[r], mode)),
                                   w * norm);
            total = total.valid() ? total + kl : kl;
        }
    }
    return total.valid() ? total : tape.constant(Matrix::Zero(1, 1));
}

ad::Var compactness_loss(std::span<const ad::Var> latents,
                         std::span<const ClusterState<double>> clusters, double epsilon,
                         CompactnessForm form) {
    if (latents.size() != clusters.size()) {
        throw std::invalid_argument("compactness_loss: one cluster state per view required");
    }
    if (latents.empty()) throw std::invalid_argument("compactness_loss: no views");
    if (!(epsilon > 0.0)) throw std::invalid_argument("compactness_loss: epsilon must be > 0");
    ad::Tape& tape = latents.front().tape();

    ad::Var total;
    int k_max = 1;
    for (std::size_t v = 0; v < latents.size(); ++v) {
        const ad::Var z = latents[v];
        const ClusterState<double>& state = clusters[v];
        if (static_cast<Index>(state.assignments.size()) != z.rows()) {
            throw std::invalid_argument("compactness_loss: assignment count mismatch in view " +
                                        std::to_string(v + 1));
        }
        k_max = std::max(k_max, state.clusters());

        std::vector<int> column(static_cast<std::size_t>(state.clusters()), -1);
        std::vector<Index> sizes(static_cast<std::size_t>(state.clusters()), 0);
        for (int a : state.assignments) ++sizes[a];
        Index occupied = 0;
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (sizes[c] > 0) column[c] = static_cast<int>(occupied++);
        }

        Matrix assigned(z.rows(), z.cols());
        Matrix averaging = Matrix::Zero(z.rows(), occupied);
        for (Index i = 0; i < z.rows(); ++i) {
            const int c = state.assignments[i];
            assigned.row(i) = state.centroids.row(c);
            averaging(i, column[c]) = 1.0 / static_cast<double>(sizes[c]);
        }
        // 1 x occupied row of mean distances C-bar_k.
        ad::Var means =
            ad::matmul(ad::transpose(ad::dist_rows(z, assigned)), tape.constant(std::move(averaging)));
        ad::Var term = form == CompactnessForm::reciprocal
                           ? ad::sum_all(ad::reciprocal(ad::add_scalar(means, epsilon)))
                           : ad::sum_all(means);
        total = total.valid() ? total + term : term;
    }
    return ad::scale(total, 1.0 / static_cast<double>(latents.size() * static_cast<std::size_t>(k_max)));
}

ad::Var combine_objective(ad::Var ae, ad::Var align, ad::Var compact, double lambda2,
                          double lambda3) {
    check_weights(lambda2, "lambda2");
    check_weights(lambda3, "lambda3");
    ad::Var total = ae;
    if (lambda2 != 0.0) total = total + ad::scale(align, lambda2);
    if (lambda3 != 0.0) total = total + ad::scale(compact, lambda3);
    return total;
}

ObjectiveTerms total_loss_rg(const BatchGraph& batch, std::size_t reliable,
                             const LossWeights& weights, const ObjectiveOptions& options) {
    check_weights(weights.lambda1, "lambda1");
    ObjectiveTerms t;
    t.ae = ae_orth_loss(batch.views, weights.lambda1, options.orth);
    const auto dists = distributions_of(batch);
    t.align = align_loss_one(dists, reliable, options.teacher);
    const auto latents = latents_of(batch);
    t.compact = compactness_loss(latents, batch.clusters, options.epsilon, options.compactness);
    t.total = combine_objective(t.ae, t.align, t.compact, weights.lambda2, weights.lambda3);
    return t;
}

ObjectiveTerms total_loss_rgs(const BatchGraph& batch, const Matrix& view_weights,
                              const LossWeights& weights, const ObjectiveOptions& options) {
    check_weights(weights.lambda1, "lambda1");
    ObjectiveTerms t;
    t.ae = ae_orth_loss(batch.views, weights.lambda1, options.orth);
    const auto dists = distributions_of(batch);
    t.align = align_loss_multi(dists, view_weights, options.teacher);
    const auto latents = latents_of(batch);
    t.compact = compactness_loss(latents, batch.clusters, options.epsilon, options.compactness);
    t.total = combine_objective(t.ae, t.align, t.compact, weights.lambda2, weights.lambda3);
    return t;
}

}  // namespace umc
