#include "umc/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace umc {

namespace {

Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    return w;
}

DenseLayer make_layer(Index fan_in, Index fan_out, std::mt19937_64& rng) {
    return {ad::Parameter(glorot_uniform(fan_in, fan_out, rng)),
            ad::Parameter(Matrix::Zero(1, fan_out))};
}

ad::Var apply(ad::Tape& tape, DenseLayer& layer, ad::Var x) {
    return ad::add_row(ad::matmul(x, tape.parameter(layer.weight)), tape.parameter(layer.bias));
}

Matrix apply(const DenseLayer& layer, const Matrix& x) {
    Matrix y = x * layer.weight.value();
    y.rowwise() += layer.bias.value().row(0);
    return y;
}

Matrix softmax(Matrix x) {
    x = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
    Vector sums = x.rowwise().sum();
    x.array().colwise() /= sums.array();
    return x;
}

}  // namespace

ViewAutoencoder::ViewAutoencoder(std::size_t view, std::vector<Index> widths, std::uint64_t seed)
    : view_(view), widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("autoencoder needs at least input and latent widths");
    for (Index w : widths_) {
        if (w < 1) throw std::invalid_argument("autoencoder layer widths must be positive");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(view)};
    std::mt19937_64 rng(seq);
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
        encoder_.push_back(make_layer(widths_[i], widths_[i + 1], rng));
    }
    for (std::size_t i = widths_.size() - 1; i > 0; --i) {
        decoder_.push_back(make_layer(widths_[i], widths_[i - 1], rng));
    }
}

ad::Var ViewAutoencoder::encode(ad::Tape& tape, ad::Var x) {
    if (x.cols() != input_dim()) {
        throw ShapeError("view " + std::to_string(view_ + 1) + " expects " +
                         std::to_string(input_dim()) + " features, got " +
                         std::to_string(x.cols()));
    }
    ad::Var h = x;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        h = apply(tape, encoder_[i], h);
        h = i + 1 < encoder_.size() ? ad::relu(h) : ad::softmax_rows(h);
    }
    return h;
}

ad::Var ViewAutoencoder::decode(ad::Tape& tape, ad::Var z) {
    if (z.cols() != latent_dim()) {
        throw ShapeError("view " + std::to_string(view_ + 1) + " decoder expects latent width " +
                         std::to_string(latent_dim()) + ", got " + std::to_string(z.cols()));
    }
    ad::Var h = z;
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        h = apply(tape, decoder_[i], h);
        if (i + 1 < decoder_.size()) h = ad::relu(h);
    }
    return h;
}

Matrix ViewAutoencoder::encode(const Matrix& x) const {
    if (x.cols() != input_dim()) {
        throw ShapeError("view " + std::to_string(view_ + 1) + " expects " +
                         std::to_string(input_dim()) + " features, got " +
                         std::to_string(x.cols()));
    }
    Matrix h = x;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        h = apply(encoder_[i], h);
        h = i + 1 < encoder_.size() ? Matrix(h.cwiseMax(0.0)) : softmax(std::move(h));
    }
    require_finite(h, "encode");
    return h;
}

Matrix ViewAutoencoder::decode(const Matrix& z) const {
    if (z.cols() != latent_dim()) {
        throw ShapeError("decoder expects latent width " + std::to_string(latent_dim()));
    }
    Matrix h = z;
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        h = apply(decoder_[i], h);
        if (i + 1 < decoder_.size()) h = h.cwiseMax(0.0);
    }
    require_finite(h, "decode");
    return h;
}

std::vector<ad::Parameter*> ViewAutoencoder::parameters() {
    std::vector<ad::Parameter*> out;
    for (auto* layers : {&encoder_, &decoder_}) {
        for (DenseLayer& l : *layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    return out;
}

std::vector<const ad::Parameter*> ViewAutoencoder::parameters() const {
    std::vector<const ad::Parameter*> out;
    for (const auto* layers : {&encoder_, &decoder_}) {
        for (const DenseLayer& l : *layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    return out;
}

std::vector<Index> default_widths(Index input_dim, Index latent_dim, std::span<const Index> hidden) {
    static constexpr std::array<Index, 3> kDefaultHidden{1024, 1024, 1024};
    std::span<const Index> h = hidden.empty() ? std::span<const Index>(kDefaultHidden) : hidden;
    std::vector<Index> widths{input_dim};
    widths.insert(widths.end(), h.begin(), h.end());
    widths.push_back(latent_dim);
    return widths;
}

std::vector<ad::Parameter*> collect_parameters(std::span<ViewAutoencoder> models) {
    std::vector<ad::Parameter*> out;
    for (ViewAutoencoder& m : models) {
        auto p = m.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

ad::Var ae_orth_loss(std::span<const ViewTerms> views, double lambda1, const OrthOptions& options) {
    if (lambda1 < 0.0) throw std::invalid_argument("ae_orth_loss: lambda1 must be >= 0");
    if (views.empty()) throw std::invalid_argument("ae_orth_loss: no views");
    ad::Tape& tape = views.front().input.tape();
    ad::Var total;
    for (const ViewTerms& t : views) {
        ad::Var term = ad::frobenius_sq(ad::subtract(t.input, t.reconstruction));
        if (lambda1 > 0.0) {
            const Index n = t.latent.rows();
            ad::Var gram = options.form == GramForm::feature
                               ? ad::matmul(ad::transpose(t.latent), t.latent)
                               : ad::matmul(t.latent, ad::transpose(t.latent));
            ad::Var eye = tape.constant(Matrix::Identity(gram.rows(), gram.cols()));
            const double weight =
                options.per_sample_scaling ? lambda1 / static_cast<double>(n) : lambda1;
            term = term + ad::scale(ad::frobenius_sq(gram - eye), weight);
        }
        total = total.valid() ? total + term : term;
    }
    return total;
}

// Checkpoint layout (all integers and doubles little-endian):
//   char[8] "UMCCKPT\0", u32 version, u32 view count,
//   per view: u32 width count, u64 widths[],
//   then per view, parameters() order, row-major doubles.
namespace {

constexpr std::array<char, 8> kMagic{'U', 'M', 'C', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), bytes.size())) throw DataError("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const ViewAutoencoder> models) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(models.size()));
    for (const ViewAutoencoder& m : models) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.widths().size()));
        for (Index w : m.widths()) write_le<std::uint64_t>(out, static_cast<std::uint64_t>(w));
    }
    for (const ViewAutoencoder& m : models) {
        for (const ad::Parameter* p : m.parameters()) {
            const Matrix& v = p->value();
            for (Index i = 0; i < v.size(); ++i) write_le<double>(out, v.data()[i]);
        }
    }
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

std::vector<ViewAutoencoder> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::array<char, 8> magic;
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw DataError("not a checkpoint file: " + path.string());
    }
    if (const auto version = read_le<std::uint32_t>(in); version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto views = read_le<std::uint32_t>(in);
    std::vector<std::vector<Index>> widths(views);
    for (auto& w : widths) {
        const auto count = read_le<std::uint32_t>(in);
        for (std::uint32_t i = 0; i < count; ++i) {
            w.push_back(static_cast<Index>(read_le<std::uint64_t>(in)));
        }
    }
    std::vector<ViewAutoencoder> models;
    models.reserve(views);
    for (std::uint32_t v = 0; v < views; ++v) {
        models.emplace_back(v, widths[v], 0);
        for (ad::Parameter* p : models.back().parameters()) {
            auto values = p->value_mut();
            for (Index i = 0; i < values.size(); ++i) values.data()[i] = read_le<double>(in);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint");
    return models;
}

}  // namespace umc
