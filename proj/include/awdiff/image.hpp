#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "awdiff/errors.hpp"

namespace awdiff {

/// 2D grayscale field of doubles, row-major, nominal range [0,1].
/// Immutable by convention once filled: the pipeline passes images by
/// const reference and builds new ones instead of mutating in place.
class Image {
  public:
    Image() = default;

    /// Zero-filled image.
    Image(int width, int height);

    /// Takes ownership of `pixels` (row-major, height*width entries).
    /// Rejects size mismatches and non-finite values.
    Image(int width, int height, std::vector<double> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }

    double& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    double* data() { return pixels_.data(); }
    const double* data() const { return pixels_.data(); }
    std::vector<double>& pixels() { return pixels_; }
    const std::vector<double>& pixels() const { return pixels_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    bool all_finite() const;

    /// Throws InvariantError when any pixel is NaN/Inf.
    void require_finite(const char* context) const;

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Deterministic 64-bit generator (xoshiro256++ seeded via SplitMix64).
/// The same seed yields the same uniform and normal streams on every
/// platform; normals come from the Marsaglia polar method (no ziggurat,
/// no cached spare, so the state is exactly the four xoshiro words).
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0,1) with 53 random mantissa bits.
    double next_uniform();

    /// Standard normal draw. Polar method; consumes a variable but
    /// seed-determined number of uniforms and discards the pair's
    /// second component.
    double next_normal();

    /// Child generator for parallel work: child(i) streams are
    /// independent of the parent and of each other. Derivation rule:
    /// reseed through SplitMix64 from (seed_word ^ golden*(index+1)).
    SeededRng child(std::uint64_t index) const;

    std::array<std::uint64_t, 4> state() const { return state_; }
    static SeededRng from_state(const std::array<std::uint64_t, 4>& words);

  private:
    SeededRng() = default;
    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_word_ = 0;
};

/// The child-seed derivation rule, exposed for callers that need a plain
/// seed per work item (phantom generation, per-sample trajectories).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return base ^ (0x9E3779B97F4A7C15ULL * (index + 1));
}

/// i.i.d. N(0,1) field, deterministic for a fixed rng state.
Image standard_normal_field(SeededRng& rng, int width, int height);

/// Loads a PGM (P5, maxval 255 or 65535) or raw-tensor (.awt, rank 2) image.
/// PGM samples are mapped linearly onto [0,1]; raw tensors are taken as-is.
Image load_image(const std::string& path);

/// Saves to PGM (16-bit, values clamped to [0,1]) when the path ends in
/// .pgm, otherwise to the lossless rank-2 raw tensor format.
void save_image(const Image& img, const std::string& path);

} // namespace awdiff
