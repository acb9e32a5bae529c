#include "awdiff/wavelet.hpp"

#include <cmath>

#include "awdiff/tensor_io.hpp"

namespace awdiff {

Kernel1D::Kernel1D(std::vector<double> taps) : taps_(std::move(taps)) {
    if (taps_.empty() || taps_.size() % 2 == 0)
        throw ParameterError("kernel must have odd length");
    double sum = 0.0;
    for (double t : taps_) sum += t;
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvariantError("kernel taps must sum to 1");
    const int r = static_cast<int>(taps_.size()) / 2;
    for (int i = 0; i < r; ++i)
        if (std::abs(taps_[i] - taps_[taps_.size() - 1 - i]) > 1e-15)
            throw InvariantError("kernel must be symmetric about its center");
}

const Kernel1D& b3_spline_kernel() {
    static const Kernel1D k({1.0 / 16, 1.0 / 4, 3.0 / 8, 1.0 / 4, 1.0 / 16});
    return k;
}

namespace {

// 1D dilated pass along rows (axis=0) or columns (axis=1).
void atrous_pass(const Image& src, Image& dst, const std::vector<double>& taps, int dilation, int axis) {
    const int w = src.width();
    const int h = src.height();
    const int r = static_cast<int>(taps.size()) / 2;
    if (axis == 0) {
        for (int y = 0; y < h; ++y) {
            const double* row = src.data() + static_cast<std::size_t>(y) * w;
            double* out = dst.data() + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k)
                    acc += taps[k + r] * row[mirror_index(x + k * dilation, w)];
                out[x] = acc;
            }
        }
    } else {
        for (int y = 0; y < h; ++y) {
            double* out = dst.data() + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k)
                    acc += taps[k + r] * src.at(mirror_index(y + k * dilation, h), x);
                out[x] = acc;
            }
        }
    }
}

} // namespace

Image atrous_convolve(const Image& img, const Kernel1D& kernel, int dilation) {
    if (dilation < 1) throw ParameterError("dilation must be >= 1");
    Image tmp(img.width(), img.height());
    Image out(img.width(), img.height());
    atrous_pass(img, tmp, kernel.taps(), dilation, 0);
    atrous_pass(tmp, out, kernel.taps(), dilation, 1);
    return out;
}

WaveletPyramid starlet_decompose(const Image& img, int scales) {
    if (scales < 1 || scales > 8)
        throw ParameterError("scales must lie in [1, 8], got " + std::to_string(scales));
    WaveletPyramid pyr;
    pyr.planes.reserve(scales);
    Image smooth = img;
    for (int s = 1; s <= scales; ++s) {
        Image next = atrous_convolve(smooth, b3_spline_kernel(), 1 << (s - 1));
        Image plane(img.width(), img.height());
        for (std::size_t i = 0; i < plane.size(); ++i)
            plane.pixels()[i] = smooth.pixels()[i] - next.pixels()[i];
        pyr.planes.push_back(std::move(plane));
        smooth = std::move(next);
    }
    pyr.residual = std::move(smooth);
    return pyr;
}

Image starlet_reconstruct(const WaveletPyramid& pyr) {
    if (pyr.planes.empty()) throw InvariantError("pyramid has no planes");
    Image out = pyr.residual;
    for (const Image& plane : pyr.planes) {
        if (!plane.same_shape(out))
            throw InvariantError("pyramid planes disagree on dimensions");
        for (std::size_t i = 0; i < out.size(); ++i)
            out.pixels()[i] += plane.pixels()[i];
    }
    return out;
}

void WaveletPyramid::save(const std::string& path) const {
    if (planes.empty()) throw InvariantError("pyramid has no planes");
    RawTensor t;
    t.dims = {static_cast<std::uint32_t>(planes.size() + 1),
              static_cast<std::uint32_t>(height()),
              static_cast<std::uint32_t>(width())};
    t.values.reserve((planes.size() + 1) * residual.size());
    for (const Image& plane : planes)
        t.values.insert(t.values.end(), plane.pixels().begin(), plane.pixels().end());
    t.values.insert(t.values.end(), residual.pixels().begin(), residual.pixels().end());
    write_raw_tensor(path, t);
}

WaveletPyramid WaveletPyramid::load(const std::string& path) {
    RawTensor t = read_raw_tensor(path);
    if (t.dims.size() != 3 || t.dims[0] < 2)
        throw FormatError("pyramid tensor must be rank 3 with at least 2 slices");
    const int slices = static_cast<int>(t.dims[0]);
    const int h = static_cast<int>(t.dims[1]);
    const int w = static_cast<int>(t.dims[2]);
    const std::size_t plane_size = static_cast<std::size_t>(h) * w;
    WaveletPyramid pyr;
    for (int s = 0; s < slices; ++s) {
        std::vector<double> px(t.values.begin() + s * plane_size,
                               t.values.begin() + (s + 1) * plane_size);
        Image img(w, h, std::move(px));
        if (s + 1 < slices)
            pyr.planes.push_back(std::move(img));
        else
            pyr.residual = std::move(img);
    }
    return pyr;
}

// ---------------------------------------------------------------------------
// Orthonormal Haar DWT
// ---------------------------------------------------------------------------

namespace {

// One analysis level on an n x m image (n, m even). Each 2x2 block
// [a b; c d] maps to ll=(a+b+c+d)/2, lh=(a-b+c-d)/2, hl=(a+b-c-d)/2,
// hh=(a-b-c+d)/2 -- an orthonormal basis, so energy is preserved.
void haar_level_forward(const Image& src, Image& ll, Image& lh, Image& hl, Image& hh) {
    const int hw = src.width() / 2;
    const int hh_dim = src.height() / 2;
    ll = Image(hw, hh_dim);
    lh = Image(hw, hh_dim);
    hl = Image(hw, hh_dim);
    hh = Image(hw, hh_dim);
    for (int y = 0; y < hh_dim; ++y) {
        for (int x = 0; x < hw; ++x) {
            double a = src.at(2 * y, 2 * x);
            double b = src.at(2 * y, 2 * x + 1);
            double c = src.at(2 * y + 1, 2 * x);
            double d = src.at(2 * y + 1, 2 * x + 1);
            ll.at(y, x) = 0.5 * (a + b + c + d);
            lh.at(y, x) = 0.5 * (a - b + c - d);
            hl.at(y, x) = 0.5 * (a + b - c - d);
            hh.at(y, x) = 0.5 * (a - b - c + d);
        }
    }
}

Image haar_level_inverse(const Image& ll, const Image& lh, const Image& hl, const Image& hh) {
    Image out(ll.width() * 2, ll.height() * 2);
    for (int y = 0; y < ll.height(); ++y) {
        for (int x = 0; x < ll.width(); ++x) {
            double s = ll.at(y, x), dh = lh.at(y, x), dv = hl.at(y, x), dd = hh.at(y, x);
            out.at(2 * y, 2 * x) = 0.5 * (s + dh + dv + dd);
            out.at(2 * y, 2 * x + 1) = 0.5 * (s - dh + dv - dd);
            out.at(2 * y + 1, 2 * x) = 0.5 * (s + dh - dv - dd);
            out.at(2 * y + 1, 2 * x + 1) = 0.5 * (s - dh - dv + dd);
        }
    }
    return out;
}

} // namespace

DwtCoefficients dwt2_forward(const Image& img, int levels) {
    if (levels < 1) throw ParameterError("levels must be >= 1");
    const int div = 1 << levels;
    if (img.width() % div != 0 || img.height() % div != 0)
        throw ParameterError("image dims must be divisible by 2^levels");
    DwtCoefficients coeffs;
    Image current = img;
    for (int l = 0; l < levels; ++l) {
        DwtCoefficients::Level lv;
        Image ll;
        haar_level_forward(current, ll, lv.lh, lv.hl, lv.hh);
        coeffs.details.push_back(std::move(lv));
        current = std::move(ll);
    }
    coeffs.approx = std::move(current);
    return coeffs;
}

Image dwt2_inverse(const DwtCoefficients& coeffs) {
    if (coeffs.details.empty()) throw InvariantError("dwt coefficients have no levels");
    Image current = coeffs.approx;
    for (int l = coeffs.levels() - 1; l >= 0; --l) {
        const auto& lv = coeffs.details[l];
        if (!lv.lh.same_shape(current) || !lv.hl.same_shape(current) || !lv.hh.same_shape(current))
            throw InvariantError("dwt subband dims inconsistent at level " + std::to_string(l + 1));
        current = haar_level_inverse(current, lv.lh, lv.hl, lv.hh);
    }
    return current;
}

} // namespace awdiff
