#pragma once

#include <string>
#include <vector>

#include "awdiff/image.hpp"

namespace awdiff {

/// Undecimated complex subband: real/imag responses of a quadrature pair
/// of oriented filters applied to one wavelet plane.
struct ComplexCoeffMap {
    Image real;
    Image imag;
    int scale = 0;       // 1-based wavelet scale
    int orientation = 0; // index into {0, 45, 90, 135} degrees
};

struct CwSsimParams {
    int scales = 3;
    int orientations = 4; // fixed set 0/45/90/135 degrees
    int window = 7;       // sliding window side, odd
    double k_stab = 1e-8; // relative to mean coefficient energy

    void validate() const;
};

/// Oriented complex coefficients of the a trous planes. Orientation o
/// labels the structure direction: the quadrature pair acts along the
/// normal, a short smoother along the structure.
std::vector<ComplexCoeffMap> complex_analysis(const Image& img, const CwSsimParams& params);

/// Windowed complex-wavelet similarity in [0, 1]; 1 for identical inputs.
double cw_ssim(const Image& x, const Image& y, const CwSsimParams& params);

/// Same windowed formula over caller-provided full-resolution planes.
/// Lets the DWT comparison path reuse identical windowing code.
double cw_ssim_from_planes(const std::vector<Image>& planes_x, const std::vector<Image>& planes_y,
                           const CwSsimParams& params);

/// Plain single-scale SSIM: 7x7 uniform window, C1=1e-4, C2=9e-4 on [0,1].
double ssim(const Image& x, const Image& y);

/// -10 log10(mse) for unit dynamic range; +inf for identical images.
double psnr(const Image& x, const Image& y);

struct PairReport {
    int pair_id = 0;
    double cwssim_atrous = 0.0;
    double cwssim_dwt = 0.0;
    double ssim = 0.0;
    double psnr = 0.0;
};

struct StructureReport {
    std::vector<PairReport> rows;
    /// Fraction of pairs where the a trous path beats the DWT path;
    /// ties count 0.5.
    double atrous_win_rate = 0.0;
};

/// Paired comparison behind the structure-preservation experiment:
/// CW-SSIM over a trous planes vs CW-SSIM over zero-order-hold upsampled
/// DWT detail bands, plus SSIM/PSNR baselines per pair.
StructureReport structure_preservation_report(const std::vector<Image>& originals,
                                              const std::vector<Image>& generated,
                                              const CwSsimParams& params);

void write_report_csv(const std::string& path, const StructureReport& report);

/// Histogram of both CW-SSIM columns: `lo hi count_atrous count_dwt` rows
/// over [0,1], for external plotting.
void write_score_histogram(const std::string& path, const StructureReport& report, int bins = 20);

} // namespace awdiff
