#include "umc/data.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace umc {

namespace fs = std::filesystem;
using json = nlohmann::json;

Index ViewBundle::total_samples() const {
    Index n = 0;
    for (const Matrix& x : views) n += x.rows();
    return n;
}

std::vector<int> ViewBundle::stacked_labels() const {
    std::vector<int> out;
    for (const auto& l : labels) out.insert(out.end(), l.begin(), l.end());
    return out;
}

void ViewBundle::validate() const {
    if (views.empty()) throw DataError("bundle '" + name + "' has no views");
    if (labels.size() != views.size()) throw DataError("one label vector per view required");
    if (clusters < 1) throw DataError("cluster count K must be >= 1");
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto tag = "view " + std::to_string(v + 1);
        if (views[v].rows() == 0) throw DataError(tag + " is empty");
        if (static_cast<Index>(labels[v].size()) != views[v].rows()) {
            throw DataError(tag + ": " + std::to_string(labels[v].size()) + " labels for " +
                            std::to_string(views[v].rows()) + " rows");
        }
        for (int l : labels[v]) {
            if (l < 0 || l >= clusters) {
                throw DataError(tag + ": label " + std::to_string(l) + " outside [0, K)");
            }
        }
        if (!all_finite(views[v])) throw DataError(tag + " contains non-finite values");
    }
}

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_cell(std::string_view cell, const fs::path& path, std::size_t line) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                        std::string(cell) + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Matrix read_matrix_csv(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<double> values;
    Index cols = -1;
    Index rows = 0;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view row = trim(line);
        if (row.empty()) continue;
        Index count = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = row.find(',', start);
            const auto cell = row.substr(start, comma == std::string_view::npos ? row.npos : comma - start);
            values.push_back(parse_cell<double>(cell, path, line_no));
            ++count;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols >= 0 && count != cols) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(cols) + " columns, got " + std::to_string(count));
        }
        cols = count;
        ++rows;
    }
    if (rows == 0) throw DataError("empty feature file: " + path.string());
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

std::vector<int> read_labels_csv(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<int> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        labels.push_back(parse_cell<int>(line, path, line_no));
    }
    if (labels.empty()) throw DataError("empty label file: " + path.string());
    return labels;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    std::string row;
    for (Index i = 0; i < m.rows(); ++i) {
        row.clear();
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) row += ',';
            row += format_double(m(i, j));
        }
        row += '\n';
        out << row;
    }
    if (!out) throw DataError("failed writing " + path.string());
}

void write_labels_csv(const fs::path& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (int l : labels) out << l << '\n';
}

ViewBundle load_dataset(const fs::path& dir, const LoadOptions& options) {
    const fs::path manifest_path = dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw DataError("invalid manifest " + manifest_path.string() + ": " + e.what());
    }

    ViewBundle b;
    try {
        b.name = manifest.value("name", dir.filename().string());
        const int view_count = manifest.at("V").get<int>();
        b.clusters = manifest.at("K").get<int>();
        const auto& views = manifest.at("views");
        if (!views.is_array() || static_cast<int>(views.size()) != view_count) {
            throw DataError("manifest declares V=" + std::to_string(view_count) + " but lists " +
                            std::to_string(views.is_array() ? views.size() : 0) + " view files");
        }
        if (manifest.contains("unpair_seed") && !manifest["unpair_seed"].is_null()) {
            b.unpair_seed = manifest["unpair_seed"].get<std::uint64_t>();
        }
        for (int v = 0; v < view_count; ++v) {
            const auto& entry = views[v];
            Matrix x = read_matrix_csv(dir / entry.at("file").get<std::string>());
            std::vector<int> y = read_labels_csv(dir / entry.at("labels_file").get<std::string>());
            const auto n = entry.at("n").get<Index>();
            const auto d = entry.at("d").get<Index>();
            if (x.rows() != n || x.cols() != d) {
                throw DataError("view " + std::to_string(v + 1) + ": manifest says " +
                                std::to_string(n) + "x" + std::to_string(d) + ", file has " +
                                shape_string(x));
            }
            if (options.standardize) standardize_columns(x);
            b.views.push_back(std::move(x));
            b.labels.push_back(std::move(y));
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + manifest_path.string() + ": " + e.what());
    }
    b.validate();
    return b;
}

void save_dataset(const ViewBundle& bundle, const fs::path& dir) {
    bundle.validate();
    fs::create_directories(dir);
    json views = json::array();
    for (std::size_t v = 0; v < bundle.views.size(); ++v) {
        const std::string file = "view" + std::to_string(v + 1) + ".csv";
        const std::string labels = "labels" + std::to_string(v + 1) + ".csv";
        write_matrix_csv(dir / file, bundle.views[v]);
        write_labels_csv(dir / labels, bundle.labels[v]);
        views.push_back({{"file", file},
                         {"labels_file", labels},
                         {"n", bundle.views[v].rows()},
                         {"d", bundle.views[v].cols()}});
    }
    json manifest = {{"name", bundle.name},
                     {"V", bundle.views.size()},
                     {"K", bundle.clusters},
                     {"views", views}};
    if (bundle.unpair_seed) manifest["unpair_seed"] = *bundle.unpair_seed;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw DataError("failed writing manifest in " + dir.string());
}

std::string dataset_hash(const fs::path& dir) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const std::string& bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    const std::string manifest = read_text(dir / "manifest.json");
    feed(manifest);
    try {
        for (const auto& entry : json::parse(manifest).at("views")) {
            feed(read_text(dir / entry.at("file").get<std::string>()));
            feed(read_text(dir / entry.at("labels_file").get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void standardize_columns(Matrix& x) {
    if (x.rows() == 0) return;
    const RowVector mean = x.colwise().mean();
    x.rowwise() -= mean;
    const RowVector sd = (x.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt();
    for (Index j = 0; j < x.cols(); ++j) {
        if (sd(j) > 0.0) x.col(j) /= sd(j);
    }
}

ViewBundle unpair(const ViewBundle& paired, std::uint64_t seed) {
    paired.validate();
    const std::size_t views = paired.view_count();
    if (views < 2) throw DataError("unpair needs at least two views");
    const Index n = paired.views.front().rows();
    for (std::size_t v = 1; v < views; ++v) {
        if (paired.views[v].rows() != n || paired.labels[v] != paired.labels.front()) {
            throw DataError("unpair needs row-aligned (paired) views");
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    ViewBundle out;
    out.name = paired.name;
    out.clusters = paired.clusters;
    out.unpair_seed = seed;
    const Index base = n / static_cast<Index>(views);
    const Index extra = n % static_cast<Index>(views);
    Index start = 0;
    for (std::size_t v = 0; v < views; ++v) {
        const Index size = base + (static_cast<Index>(v) < extra ? 1 : 0);
        std::vector<Index> rows(order.begin() + start, order.begin() + start + size);
        std::sort(rows.begin(), rows.end());
        start += size;

        Matrix x(size, paired.views[v].cols());
        std::vector<int> y;
        y.reserve(static_cast<std::size_t>(size));
        for (Index i = 0; i < size; ++i) {
            x.row(i) = paired.views[v].row(rows[i]);
            y.push_back(paired.labels[v][rows[i]]);
        }
        out.views.push_back(std::move(x));
        out.labels.push_back(std::move(y));
        out.source_rows.push_back(std::move(rows));
    }
    return out;
}

ViewBundle synth_generate(const SynthSpec& spec) {
    if (spec.clusters < 1 || spec.views < 1 || spec.per_cluster < 1) {
        throw std::invalid_argument("synth: clusters, views and per_cluster must be >= 1");
    }
    const int gen_dim = spec.latent_dim > 0 ? spec.latent_dim : spec.clusters;
    if (gen_dim < spec.clusters) {
        throw std::invalid_argument("synth: generative dimension must be >= cluster count");
    }
    if (!spec.dims.empty() && static_cast<int>(spec.dims.size()) != spec.views) {
        throw std::invalid_argument("synth: one feature width per view required");
    }
    if (!spec.noise.empty() && static_cast<int>(spec.noise.size()) != spec.views) {
        throw std::invalid_argument("synth: one noise level per view required");
    }
    for (double s : spec.noise) {
        if (s < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Index n = static_cast<Index>(spec.clusters) * spec.per_cluster;

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i / spec.per_cluster);
    std::shuffle(labels.begin(), labels.end(), rng);

    // Vertices (s / sqrt 2) e_k are pairwise s apart.
    const double radius = spec.separation / std::sqrt(2.0);
    Matrix latent(n, gen_dim);
    for (Index i = 0; i < n; ++i) {
        for (int j = 0; j < gen_dim; ++j) latent(i, j) = gauss(rng);
        latent(i, labels[i]) += radius;
    }

    ViewBundle b;
    b.name = spec.name;
    b.clusters = spec.clusters;
    for (int v = 0; v < spec.views; ++v) {
        const Index d = spec.dims.empty() ? 20 + 10 * v : spec.dims[v];
        Matrix map(gen_dim, d);
        for (Index i = 0; i < map.size(); ++i) map.data()[i] = gauss(rng) / std::sqrt(double(gen_dim));
        Matrix x = latent * map;
        if (spec.nonlinear) x = x.array().tanh().matrix();
        const double sigma = spec.noise.empty() ? 0.0 : spec.noise[v];
        for (Index i = 0; i < x.size(); ++i) {
            const double e = gauss(rng);
            x.data()[i] += sigma * e;
        }
        b.views.push_back(std::move(x));
        b.labels.push_back(labels);
    }
    return b;
}

}  // namespace umc
