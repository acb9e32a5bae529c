#pragma once

#include <string>
#include <vector>

#include "awdiff/image.hpp"

namespace awdiff {

/// Odd-length symmetric smoothing filter; taps sum to 1.
class Kernel1D {
  public:
    explicit Kernel1D(std::vector<double> taps);

    const std::vector<double>& taps() const { return taps_; }
    int radius() const { return static_cast<int>(taps_.size()) / 2; }

  private:
    std::vector<double> taps_;
};

/// The canonical starlet smoother: [1/16, 1/4, 3/8, 1/4, 1/16].
const Kernel1D& b3_spline_kernel();

/// Whole-sample mirror reflection of index i into [0, n): ..., 2,1 | 0,1,2,
/// ..., n-1 | n-2, n-3, ... Repeated reflection handles arbitrarily large
/// offsets (period 2n-2).
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

/// Separable dilated convolution (rows then columns) with mirrored
/// boundaries. Output dims equal input dims; a normalized kernel maps
/// constants to themselves exactly.
Image atrous_convolve(const Image& img, const Kernel1D& kernel, int dilation);

/// Undecimated wavelet planes WP^(1..S) plus the final smooth residual.
/// residual + sum(planes) reconstructs the input to ~1e-15.
struct WaveletPyramid {
    std::vector<Image> planes;
    Image residual;

    int scales() const { return static_cast<int>(planes.size()); }
    int width() const { return residual.width(); }
    int height() const { return residual.height(); }

    /// Serializes as a rank-3 (S+1, H, W) raw tensor, residual last.
    void save(const std::string& path) const;
    static WaveletPyramid load(const std::string& path);
};

/// S^(0)=img; S^(s)=atrous(S^(s-1), B3, 2^(s-1)); WP^(s)=S^(s-1)-S^(s).
/// scales must lie in [1, 8].
WaveletPyramid starlet_decompose(const Image& img, int scales);

/// residual + sum of planes.
Image starlet_reconstruct(const WaveletPyramid& pyr);

/// The conditioning feature extractor f = {WP^(1)..WP^(S)}: same transform
/// as starlet_decompose, exposed under the role it plays in the denoiser.
inline WaveletPyramid encoder_features(const Image& img, int scales) {
    return starlet_decompose(img, scales);
}

/// Decimated orthonormal Haar coefficients. details[l] holds the three
/// half-resolution subbands produced at level l+1; approx is the final
/// low-pass band at dims / 2^levels.
struct DwtCoefficients {
    struct Level {
        Image lh; // horizontal detail (differences along x)
        Image hl; // vertical detail (differences along y)
        Image hh; // diagonal detail
    };
    std::vector<Level> details;
    Image approx;

    int levels() const { return static_cast<int>(details.size()); }
};

/// Multilevel 2D orthonormal Haar analysis; dims must be divisible by 2^levels.
DwtCoefficients dwt2_forward(const Image& img, int levels);

/// Perfect-reconstruction inverse of dwt2_forward.
Image dwt2_inverse(const DwtCoefficients& coeffs);

} // namespace awdiff
