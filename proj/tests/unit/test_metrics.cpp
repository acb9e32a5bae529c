#include <cmath>

#include "doctest.h"

#include "awdiff/metrics.hpp"
#include "awdiff/phantom.hpp"
#include "awdiff/wavelet.hpp"
#include "oracles.hpp"

using namespace awdiff;

namespace {

Image translate1px(const Image& img) {
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(y, x) = img.at(mirror_index(y, img.height()), mirror_index(x - 1, img.width()));
    return out;
}

Image bline_phantom(std::uint64_t seed, int size = 64, double speckle = 0.05) {
    PhantomParams p;
    p.width = size;
    p.height = size;
    p.n_blines = 2 + static_cast<int>(seed % 3);
    p.speckle_sigma = speckle;
    p.seed = seed;
    return generate_phantom(p).first;
}

} // namespace

TEST_CASE("complex analysis of a constant image vanishes") {
    Image img(16, 16);
    for (double& v : img.pixels()) v = 0.42;
    CwSsimParams p;
    for (const auto& m : complex_analysis(img, p)) {
        CHECK(m.real.width() == 16);
        CHECK(m.real.height() == 16);
        for (std::size_t i = 0; i < m.real.size(); ++i) {
            CHECK(std::abs(m.real.pixels()[i]) < 1e-10);
            CHECK(std::abs(m.imag.pixels()[i]) < 1e-10);
        }
    }
}

TEST_CASE("vertical line excites the 90-degree subband most") {
    Image img(32, 32);
    const int col = 16;
    for (int y = 0; y < 32; ++y) img.at(y, col) = 1.0;
    CwSsimParams p;
    p.scales = 2;
    auto maps = complex_analysis(img, p);

    // Compare orientation magnitudes at the line column, middle row,
    // within each scale.
    for (int s = 0; s < p.scales; ++s) {
        double mags[4];
        for (int o = 0; o < 4; ++o) {
            const auto& m = maps[s * 4 + o];
            const double re = m.real.at(16, col), im = m.imag.at(16, col);
            mags[o] = std::sqrt(re * re + im * im);
        }
        CHECK(mags[2] > mags[0]);
        CHECK(mags[2] > mags[1]);
        CHECK(mags[2] > mags[3]);
    }
}

TEST_CASE("complex analysis is linear in the image") {
    SeededRng rng(1);
    Image x = oracles::random_image(rng, 16, 16, -1.0, 1.0);
    Image y = oracles::random_image(rng, 16, 16, -1.0, 1.0);
    const double a = 0.8, b = -1.6;
    Image combo(16, 16);
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo.pixels()[i] = a * x.pixels()[i] + b * y.pixels()[i];
    CwSsimParams p;
    p.scales = 2;
    auto mx = complex_analysis(x, p);
    auto my = complex_analysis(y, p);
    auto mc = complex_analysis(combo, p);
    for (std::size_t s = 0; s < mc.size(); ++s)
        for (std::size_t i = 0; i < mc[s].real.size(); ++i) {
            CHECK(mc[s].real.pixels()[i] ==
                  doctest::Approx(a * mx[s].real.pixels()[i] + b * my[s].real.pixels()[i])
                      .epsilon(1e-10));
            CHECK(mc[s].imag.pixels()[i] ==
                  doctest::Approx(a * mx[s].imag.pixels()[i] + b * my[s].imag.pixels()[i])
                      .epsilon(1e-10));
        }
}

TEST_CASE("cw-ssim identities") {
    CwSsimParams p;
    SeededRng rng(2);

    SUBCASE("self similarity is exactly 1") {
        Image x = bline_phantom(3);
        CHECK(std::abs(cw_ssim(x, x, p) - 1.0) < 1e-9);
        Image noisy = oracles::random_image(rng, 24, 24, -1.0, 1.0);
        CHECK(std::abs(cw_ssim(noisy, noisy, p) - 1.0) < 1e-9);
    }

    SUBCASE("constant pair scores 1 through the stabilizer floor") {
        Image c1(16, 16), c2(16, 16);
        for (double& v : c1.pixels()) v = 0.2;
        for (double& v : c2.pixels()) v = 0.2;
        CHECK(cw_ssim(c1, c2, p) == doctest::Approx(1.0));
    }

    SUBCASE("symmetry and range on random pairs") {
        for (int rep = 0; rep < 8; ++rep) {
            Image x = oracles::random_image(rng, 20, 20);
            Image y = oracles::random_image(rng, 20, 20);
            const double sxy = cw_ssim(x, y, p);
            const double syx = cw_ssim(y, x, p);
            CHECK(std::abs(sxy - syx) < 1e-12);
            CHECK(sxy >= 0.0);
            CHECK(sxy <= 1.0 + 1e-12);
        }
    }

    SUBCASE("sign flip leaves the magnitude formula at 1") {
        Image x = oracles::random_image(rng, 20, 20, -0.5, 0.5);
        double mean = 0.0;
        for (double v : x.pixels()) mean += v;
        mean /= static_cast<double>(x.size());
        for (double& v : x.pixels()) v -= mean; // zero-mean
        Image neg(20, 20);
        for (std::size_t i = 0; i < x.size(); ++i) neg.pixels()[i] = -x.pixels()[i];
        CHECK(cw_ssim(x, neg, p) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("dim mismatch is rejected") {
        Image a(16, 16), b(8, 8);
        CHECK_THROWS_AS(cw_ssim(a, b, p), InvariantError);
    }
}

TEST_CASE("ssim basics") {
    SeededRng rng(5);
    Image x = bline_phantom(7, 32);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("brightness shift lowers the score") {
        Image shifted(32, 32);
        for (std::size_t i = 0; i < x.size(); ++i)
            shifted.pixels()[i] = std::min(1.0, x.pixels()[i] + 0.5);
        CHECK(ssim(x, shifted) < 1.0);
    }

    SUBCASE("checkerboard against its inverse is negative") {
        // 16x16 board of 4x4 cells.
        Image board(16, 16);
        for (int y = 0; y < 16; ++y)
            for (int x2 = 0; x2 < 16; ++x2)
                board.at(y, x2) = ((y / 4 + x2 / 4) % 2 == 0) ? 1.0 : 0.0;
        Image inverse(16, 16);
        for (std::size_t i = 0; i < board.size(); ++i)
            inverse.pixels()[i] = 1.0 - board.pixels()[i];
        CHECK(ssim(board, inverse) < 0.0);
    }
}

TEST_CASE("psnr endpoints") {
    Image x = bline_phantom(9, 32);
    CHECK(std::isinf(psnr(x, x)));
    Image y = x;
    y.at(0, 0) += 0.5;
    CHECK(psnr(x, y) > 10.0);
    CHECK(std::isfinite(psnr(x, y)));
}

TEST_CASE("translation hurts cw-ssim less than ssim on textured phantoms") {
    CwSsimParams p;
    int cw_wins = 0;
    const int pairs = 16;
    for (int i = 0; i < pairs; ++i) {
        Image x = bline_phantom(100 + i);
        Image shifted = translate1px(x);
        const double cw_drop = 1.0 - cw_ssim(x, shifted, p);
        const double ssim_drop = 1.0 - ssim(x, shifted);
        if (cw_drop < ssim_drop) ++cw_wins;
    }
    CHECK(cw_wins == pairs);
}

TEST_CASE("structure report on identical pairs") {
    CwSsimParams p;
    std::vector<Image> originals, generated;
    for (int i = 0; i < 3; ++i) {
        Image x = bline_phantom(200 + i, 32);
        originals.push_back(x);
        generated.push_back(x);
    }
    StructureReport report = structure_preservation_report(originals, generated, p);
    REQUIRE(report.rows.size() == 3);
    for (const auto& row : report.rows) {
        CHECK(row.cwssim_atrous == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(row.cwssim_dwt == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(row.ssim == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::isinf(row.psnr));
    }
    CHECK(report.atrous_win_rate == doctest::Approx(0.5));

    SUBCASE("empty lists produce an empty report") {
        StructureReport empty = structure_preservation_report({}, {}, p);
        CHECK(empty.rows.empty());
    }

    SUBCASE("length mismatch is rejected") {
        generated.pop_back();
        CHECK_THROWS_AS(structure_preservation_report(originals, generated, p), ParameterError);
    }
}

TEST_CASE("a trous path wins on translated speckled pairs") {
    CwSsimParams p;
    std::vector<Image> originals, generated;
    SeededRng rng(11);
    for (int i = 0; i < 8; ++i) {
        Image x = bline_phantom(300 + i);
        Image degraded = translate1px(x);
        for (double& v : degraded.pixels())
            v = std::clamp(v * (1.0 + 0.03 * rng.next_normal()), 0.0, 1.0);
        originals.push_back(std::move(x));
        generated.push_back(std::move(degraded));
    }
    StructureReport report = structure_preservation_report(originals, generated, p);
    CHECK(report.atrous_win_rate >= 0.75);
}
