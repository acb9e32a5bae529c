#include <cmath>

#include "doctest.h"

#include "awdiff/phantom.hpp"
#include "oracles.hpp"

using namespace awdiff;

TEST_CASE("clean phantom has one bright band and a flat floor below it") {
    PhantomParams p;
    p.width = 32;
    p.height = 32;
    p.n_blines = 0;
    p.speckle_sigma = 0.0;
    auto [img, label] = generate_phantom(p);
    CHECK(label.text == "0 B-lines");

    // One contiguous bright row region near pleural_line_row.
    int brightest_row = 0;
    double best = 0.0;
    for (int y = 0; y < 32; ++y) {
        double row_mean = 0.0;
        for (int x = 0; x < 32; ++x) row_mean += img.at(y, x);
        if (row_mean > best) {
            best = row_mean;
            brightest_row = y;
        }
    }
    CHECK(brightest_row == 8); // 0.25 * 32

    // Below the band the column maxima are flat (background only).
    for (int x = 0; x < 32; ++x) {
        double col_max = 0.0;
        for (int y = 16; y < 32; ++y) col_max = std::max(col_max, img.at(y, x));
        CHECK(col_max == doctest::Approx(0.05).epsilon(1e-9));
    }
}

TEST_CASE("requested number of B-line columns appears below the band") {
    PhantomParams p;
    p.width = 32;
    p.height = 32;
    p.n_blines = 3;
    p.speckle_sigma = 0.0;
    p.seed = 9;
    auto [img, label] = generate_phantom(p);
    CHECK(label.text == "3 B-lines");

    const double background = 0.05;
    int hot_columns = 0;
    for (int x = 0; x < 32; ++x) {
        double mean = 0.0;
        int rows = 0;
        for (int y = 16; y < 32; ++y) {
            mean += img.at(y, x);
            ++rows;
        }
        mean /= rows;
        if (mean > 3.0 * background) ++hot_columns;
    }
    CHECK(hot_columns == 3);
}

TEST_CASE("phantoms are deterministic per seed") {
    PhantomParams p;
    p.n_blines = 2;
    p.speckle_sigma = 0.1;
    p.seed = 77;
    auto [a, la] = generate_phantom(p);
    auto [b, lb] = generate_phantom(p);
    CHECK(la.text == lb.text);
    CHECK(oracles::max_abs_diff(a, b) == 0.0);

    p.seed = 78;
    auto [c, lc] = generate_phantom(p);
    CHECK(oracles::max_abs_diff(a, c) > 0.0);
}

TEST_CASE("irregular pleura flag shows up in the label and the image") {
    PhantomParams p;
    p.irregular_pleura = true;
    p.seed = 5;
    auto [img, label] = generate_phantom(p);
    CHECK(label.text == "0 B-lines, irregular pleura");

    PhantomParams flat = p;
    flat.irregular_pleura = false;
    auto [smooth, l2] = generate_phantom(flat);
    CHECK(oracles::max_abs_diff(img, smooth) > 0.0);
}

TEST_CASE("parameter validation") {
    PhantomParams p;
    p.width = 4;
    CHECK_THROWS_AS(generate_phantom(p), ParameterError);
    p = PhantomParams{};
    p.speckle_sigma = -0.1;
    CHECK_THROWS_AS(generate_phantom(p), ParameterError);
    p = PhantomParams{};
    p.n_blines = 1000; // cannot fit as distinct columns
    CHECK_THROWS_AS(generate_phantom(p), ParameterError);
}

TEST_CASE("speckle perturbs but stays in range") {
    PhantomParams p;
    p.n_blines = 2;
    p.speckle_sigma = 0.2;
    p.seed = 3;
    auto [img, label] = generate_phantom(p);
    for (double v : img.pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
