#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awdiff/image.hpp"

namespace awdiff {

enum class EmbeddingSource { ToyText, ToyImage, ExternalFile };

/// Fixed-dimension real vector z_y (text side) or z_x (image side).
struct ConditioningEmbedding {
    std::vector<double> values;
    EmbeddingSource source = EmbeddingSource::ToyText;

    int dim() const { return static_cast<int>(values.size()); }
    double norm() const;
};

/// Clinical-style label text, e.g. "3 B-lines, irregular pleura".
struct LabelPrompt {
    std::string text;

    /// Throws ParameterError when the text is empty after trimming.
    void validate() const;
};

/// Deterministic text embedding: whitespace tokens are hashed (FNV-1a 64)
/// to seeded Gaussian vectors, averaged and L2-normalized. Stands in for a
/// frozen text encoder; identical labels always produce identical vectors.
ConditioningEmbedding toy_text_embed(const LabelPrompt& label, int dim);

/// Frozen linear image embedder: average-pool to 8x8, flatten, multiply by
/// a seeded random projection, L2-normalize. Differentiable w.r.t. pixels.
class ToyImageEmbedder {
  public:
    static constexpr int kPoolSide = 8;
    static constexpr std::uint64_t kDefaultSeed = 0x1062u;

    explicit ToyImageEmbedder(int dim, std::uint64_t seed = kDefaultSeed);

    int dim() const { return dim_; }

    /// Requires width and height >= 8 so every pooling cell is nonempty.
    ConditioningEmbedding embed(const Image& img) const;

    /// Gradient of (d_loss/d_embedding . embedding) w.r.t. every pixel.
    Image pixel_grad(const Image& img, const std::vector<double>& d_embedding) const;

  private:
    std::vector<double> pooled(const Image& img) const;

    int dim_;
    std::vector<double> projection_; // dim x 64, row-major
};

/// Rank-1 raw tensor, loaded verbatim. expected_dim > 0 enforces the
/// active architecture's embedding dimension.
ConditioningEmbedding load_external_embedding(const std::string& path, int expected_dim = 0);

/// 1 - cos(z_img, z_txt), in [0, 2]. Scale invariant in each argument.
double cosine_alignment_loss(const ConditioningEmbedding& z_img, const ConditioningEmbedding& z_txt);

/// Gradient of cosine_alignment_loss w.r.t. z_img.
std::vector<double> cosine_alignment_loss_grad(const ConditioningEmbedding& z_img,
                                               const ConditioningEmbedding& z_txt);

} // namespace awdiff
