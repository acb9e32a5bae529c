#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "awdiff/conditioning.hpp"
#include "awdiff/image.hpp"

namespace awdiff {

/// Synthetic lung-ultrasound-style test image: dark background, one bright
/// horizontal pleural band, vertical streaks below it, multiplicative
/// speckle. Stands in for clinical data at desk scale.
struct PhantomParams {
    int width = 32;
    int height = 32;
    double pleural_line_row = 0.25; // fraction of height
    double pleural_brightness = 0.9;
    int n_blines = 0;
    int bline_width_px = 1;
    double bline_brightness = 0.7;
    double speckle_sigma = 0.0; // multiplicative noise scale
    bool irregular_pleura = false;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic per seed. The label is "<n> B-lines", with
/// ", irregular pleura" appended when the roughness flag is set.
std::pair<Image, LabelPrompt> generate_phantom(const PhantomParams& params);

} // namespace awdiff
