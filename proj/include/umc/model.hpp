#pragma once

#include "umc/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace umc {

/// Fully connected layer y = x W + b with W of shape fan_in x fan_out.
struct DenseLayer {
    ad::Parameter weight;
    ad::Parameter bias;
};

/// Encoder F^v and decoder G^v for one view.
///
/// `widths` lists the encoder from input to latent, e.g. {d, 1024, 1024, 1024, 128};
/// the decoder mirrors it. Hidden layers use relu, the encoder output is a row
/// softmax and the decoder output is linear.
class ViewAutoencoder {
public:
    ViewAutoencoder(std::size_t view, std::vector<Index> widths, std::uint64_t seed);

    std::size_t view() const { return view_; }
    Index input_dim() const { return widths_.front(); }
    Index latent_dim() const { return widths_.back(); }
    const std::vector<Index>& widths() const { return widths_; }

    ad::Var encode(ad::Tape& tape, ad::Var x);
    ad::Var decode(ad::Tape& tape, ad::Var z);

    /// Forward pass without recording.
    Matrix encode(const Matrix& x) const;
    Matrix decode(const Matrix& z) const;

    std::vector<DenseLayer>& encoder() { return encoder_; }
    std::vector<DenseLayer>& decoder() { return decoder_; }
    const std::vector<DenseLayer>& encoder() const { return encoder_; }
    const std::vector<DenseLayer>& decoder() const { return decoder_; }

    /// Encoder then decoder, weight before bias, in layer order.
    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;

private:
    std::size_t view_;
    std::vector<Index> widths_;
    std::vector<DenseLayer> encoder_;
    std::vector<DenseLayer> decoder_;
};

/// Default encoder widths: input, three 1024-wide hidden layers, latent.
std::vector<Index> default_widths(Index input_dim, Index latent_dim,
                                  std::span<const Index> hidden = {});

std::vector<ad::Parameter*> collect_parameters(std::span<ViewAutoencoder> models);

struct ViewTerms {
    ad::Var input;           ///< X^v
    ad::Var latent;          ///< Z^v
    ad::Var reconstruction;  ///< G^v(F^v(X^v))
};

/// Which Gram matrix the orthogonality term drives toward identity.
enum class GramForm {
    feature,  ///< Z^T Z, latent_dim x latent_dim
    sample,   ///< Z Z^T, batch x batch
};

struct OrthOptions {
    GramForm form = GramForm::feature;
    /// Divide each view's Gram penalty by its batch row count.
    bool per_sample_scaling = true;
};

/// Sum over views of ||X - X_hat||_F^2 + lambda1 * ||Gram(Z) - I||_F^2.
ad::Var ae_orth_loss(std::span<const ViewTerms> views, double lambda1,
                     const OrthOptions& options = {});

/// Flat little-endian checkpoint: magic, version, per-view widths, then every
/// parameter matrix in parameters() order.
void save_checkpoint(const std::filesystem::path& path, std::span<const ViewAutoencoder> models);
std::vector<ViewAutoencoder> load_checkpoint(const std::filesystem::path& path);

}  // namespace umc
