#include "awdiff/conditioning.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "awdiff/tensor_io.hpp"

namespace awdiff {

double ConditioningEmbedding::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

void LabelPrompt::validate() const {
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) return;
    throw ParameterError("label prompt is empty");
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

ConditioningEmbedding toy_text_embed(const LabelPrompt& label, int dim) {
    label.validate();
    if (dim < 1) throw ParameterError("embedding dim must be positive");
    std::vector<double> acc(dim, 0.0);
    std::istringstream ss(label.text);
    std::string token;
    int count = 0;
    while (ss >> token) {
        SeededRng rng(fnv1a64(token));
        for (int i = 0; i < dim; ++i) acc[i] += rng.next_normal();
        ++count;
    }
    if (count == 0) throw ParameterError("label prompt is empty");
    double norm = 0.0;
    for (double& v : acc) {
        v /= count;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InvariantError("degenerate text embedding (zero norm)");
    for (double& v : acc) v /= norm;
    return {std::move(acc), EmbeddingSource::ToyText};
}

ToyImageEmbedder::ToyImageEmbedder(int dim, std::uint64_t seed) : dim_(dim) {
    if (dim < 1) throw ParameterError("embedding dim must be positive");
    SeededRng rng(seed);
    const int n = kPoolSide * kPoolSide;
    projection_.resize(static_cast<std::size_t>(dim) * n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (double& v : projection_) v = scale * rng.next_normal();
}

std::vector<double> ToyImageEmbedder::pooled(const Image& img) const {
    if (img.width() < kPoolSide || img.height() < kPoolSide)
        throw ParameterError("toy image embedder needs images at least 8x8");
    std::vector<double> cells(kPoolSide * kPoolSide, 0.0);
    for (int by = 0; by < kPoolSide; ++by) {
        int y0 = by * img.height() / kPoolSide;
        int y1 = (by + 1) * img.height() / kPoolSide;
        for (int bx = 0; bx < kPoolSide; ++bx) {
            int x0 = bx * img.width() / kPoolSide;
            int x1 = (bx + 1) * img.width() / kPoolSide;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) sum += img.at(y, x);
            cells[by * kPoolSide + bx] = sum / ((y1 - y0) * (x1 - x0));
        }
    }
    return cells;
}

ConditioningEmbedding ToyImageEmbedder::embed(const Image& img) const {
    std::vector<double> cells = pooled(img);
    std::vector<double> u(dim_, 0.0);
    const int n = kPoolSide * kPoolSide;
    for (int i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += projection_[static_cast<std::size_t>(i) * n + j] * cells[j];
        u[i] = acc;
    }
    double norm = 0.0;
    for (double v : u) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InvariantError("image embedding has zero norm");
    for (double& v : u) v /= norm;
    return {std::move(u), EmbeddingSource::ToyImage};
}

Image ToyImageEmbedder::pixel_grad(const Image& img, const std::vector<double>& d_embedding) const {
    if (static_cast<int>(d_embedding.size()) != dim_)
        throw InvariantError("upstream gradient dim mismatch");
    std::vector<double> cells = pooled(img);
    const int n = kPoolSide * kPoolSide;
    std::vector<double> u(dim_, 0.0);
    for (int i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += projection_[static_cast<std::size_t>(i) * n + j] * cells[j];
        u[i] = acc;
    }
    double norm_sq = 0.0;
    for (double v : u) norm_sq += v * v;
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) throw InvariantError("image embedding has zero norm");

    // z = u/|u|  =>  dL/du = (g - z (z.g)) / |u|  with g the upstream grad.
    std::vector<double> z(dim_);
    for (int i = 0; i < dim_; ++i) z[i] = u[i] / norm;
    double zg = 0.0;
    for (int i = 0; i < dim_; ++i) zg += z[i] * d_embedding[i];
    std::vector<double> du(dim_);
    for (int i = 0; i < dim_; ++i) du[i] = (d_embedding[i] - z[i] * zg) / norm;

    // dL/dcell = P^T du, then spread uniformly over each pooling cell.
    std::vector<double> dcell(n, 0.0);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < n; ++j) dcell[j] += projection_[static_cast<std::size_t>(i) * n + j] * du[i];

    Image grad(img.width(), img.height());
    for (int by = 0; by < kPoolSide; ++by) {
        int y0 = by * img.height() / kPoolSide;
        int y1 = (by + 1) * img.height() / kPoolSide;
        for (int bx = 0; bx < kPoolSide; ++bx) {
            int x0 = bx * img.width() / kPoolSide;
            int x1 = (bx + 1) * img.width() / kPoolSide;
            double g = dcell[by * kPoolSide + bx] / ((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) grad.at(y, x) = g;
        }
    }
    return grad;
}

ConditioningEmbedding load_external_embedding(const std::string& path, int expected_dim) {
    RawTensor t = read_raw_tensor(path);
    if (t.dims.size() != 1)
        throw FormatError("embedding tensor must be rank 1, got rank " + std::to_string(t.dims.size()));
    if (expected_dim > 0 && static_cast<int>(t.dims[0]) != expected_dim)
        throw FormatError("embedding dim " + std::to_string(t.dims[0]) + " does not match configured dim " +
                          std::to_string(expected_dim));
    return {std::move(t.values), EmbeddingSource::ExternalFile};
}

double cosine_alignment_loss(const ConditioningEmbedding& z_img, const ConditioningEmbedding& z_txt) {
    if (z_img.dim() != z_txt.dim())
        throw InvariantError("embedding dims differ");
    double ni = z_img.norm(), nt = z_txt.norm();
    if (ni == 0.0 || nt == 0.0)
        throw ParameterError("cosine undefined for zero-norm embedding");
    double dot = 0.0;
    for (int i = 0; i < z_img.dim(); ++i) dot += z_img.values[i] * z_txt.values[i];
    return 1.0 - dot / (ni * nt);
}

std::vector<double> cosine_alignment_loss_grad(const ConditioningEmbedding& z_img,
                                               const ConditioningEmbedding& z_txt) {
    if (z_img.dim() != z_txt.dim())
        throw InvariantError("embedding dims differ");
    double ni = z_img.norm(), nt = z_txt.norm();
    if (ni == 0.0 || nt == 0.0)
        throw ParameterError("cosine undefined for zero-norm embedding");
    double dot = 0.0;
    for (int i = 0; i < z_img.dim(); ++i) dot += z_img.values[i] * z_txt.values[i];
    // d/dz_img [1 - z.t/(|z||t|)] = -t/(|z||t|) + (z.t) z / (|z|^3 |t|)
    std::vector<double> grad(z_img.dim());
    for (int i = 0; i < z_img.dim(); ++i)
        grad[i] = -z_txt.values[i] / (ni * nt) + dot * z_img.values[i] / (ni * ni * ni * nt);
    return grad;
}

} // namespace awdiff
