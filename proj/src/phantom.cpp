#include "awdiff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace awdiff {

void PhantomParams::validate() const {
    if (width < 8 || height < 8) throw ParameterError("phantom must be at least 8x8");
    if (pleural_line_row <= 0.0 || pleural_line_row >= 1.0)
        throw ParameterError("pleural_line_row must lie in (0, 1)");
    if (pleural_brightness < 0.0 || pleural_brightness > 1.0 || bline_brightness < 0.0 ||
        bline_brightness > 1.0)
        throw ParameterError("brightness values must lie in [0, 1]");
    if (n_blines < 0) throw ParameterError("n_blines must be >= 0");
    if (bline_width_px < 1) throw ParameterError("bline_width_px must be >= 1");
    if (speckle_sigma < 0.0) throw ParameterError("speckle_sigma must be >= 0");
}

std::pair<Image, LabelPrompt> generate_phantom(const PhantomParams& p) {
    p.validate();
    SeededRng rng(p.seed);
    const int w = p.width, h = p.height;
    const double background = 0.05;

    Image img(w, h);
    for (double& v : img.pixels()) v = background;

    // Pleural band: smooth vertical gaussian profile around the band row,
    // optionally jittered per column for the irregular variant.
    const double band_row = p.pleural_line_row * h;
    const double band_sigma = std::max(0.6, h / 40.0);
    std::vector<double> jitter(w, 0.0);
    if (p.irregular_pleura)
        for (int x = 0; x < w; ++x) jitter[x] = 1.5 * rng.next_normal();
    for (int x = 0; x < w; ++x) {
        const double center = band_row + jitter[x];
        for (int y = 0; y < h; ++y) {
            double d = (y - center) / band_sigma;
            double v = p.pleural_brightness * std::exp(-0.5 * d * d);
            img.at(y, x) = std::max(img.at(y, x), v);
        }
    }

    // B-lines: vertical streaks from just below the band to the bottom,
    // at distinct seeded columns with a margin of one streak width.
    const int band_bottom = std::min(h - 1, static_cast<int>(std::ceil(band_row + 2.0 * band_sigma)));
    std::vector<int> columns;
    if (p.n_blines > 0) {
        const int margin = p.bline_width_px;
        const int lo = margin, hi = w - margin - p.bline_width_px;
        if (hi < lo) throw ParameterError("image too narrow for the requested B-lines");
        std::vector<int> candidates;
        for (int c = lo; c <= hi; ++c) candidates.push_back(c);
        for (int k = 0; k < p.n_blines; ++k) {
            if (candidates.empty()) throw ParameterError("not enough distinct columns for B-lines");
            std::size_t pick = rng.next_u64() % candidates.size();
            int col = candidates[pick];
            columns.push_back(col);
            // Remove the chosen column and its immediate neighbors so
            // streaks never touch.
            std::erase_if(candidates, [&](int c) {
                return std::abs(c - col) <= p.bline_width_px;
            });
        }
    }
    for (int col : columns) {
        for (int dx = 0; dx < p.bline_width_px; ++dx) {
            for (int y = band_bottom; y < h; ++y) {
                // Slight decay with depth, as real B-lines fade.
                double depth = static_cast<double>(y - band_bottom) / std::max(1, h - band_bottom);
                double v = p.bline_brightness * (1.0 - 0.25 * depth);
                img.at(y, col + dx) = std::max(img.at(y, col + dx), v);
            }
        }
    }

    if (p.speckle_sigma > 0.0) {
        for (double& v : img.pixels()) {
            v *= 1.0 + p.speckle_sigma * rng.next_normal();
            v = std::clamp(v, 0.0, 1.0);
        }
    }

    LabelPrompt label;
    label.text = std::to_string(p.n_blines) + " B-lines";
    if (p.irregular_pleura) label.text += ", irregular pleura";
    return {std::move(img), std::move(label)};
}

} // namespace awdiff
