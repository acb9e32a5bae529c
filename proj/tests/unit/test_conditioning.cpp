#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "awdiff/conditioning.hpp"
#include "awdiff/tensor_io.hpp"
#include "oracles.hpp"

using namespace awdiff;

TEST_CASE("toy text embeddings are deterministic unit vectors") {
    ConditioningEmbedding a = toy_text_embed(LabelPrompt{"3 B-lines"}, 16);
    ConditioningEmbedding b = toy_text_embed(LabelPrompt{"3 B-lines"}, 16);
    CHECK(a.values == b.values);
    CHECK(std::abs(a.norm() - 1.0) < 1e-12);
    CHECK(a.source == EmbeddingSource::ToyText);
}

TEST_CASE("distinct labels embed differently") {
    ConditioningEmbedding two = toy_text_embed(LabelPrompt{"2 B-lines"}, 16);
    ConditioningEmbedding five = toy_text_embed(LabelPrompt{"5 B-lines"}, 16);
    double dot = 0.0;
    for (int i = 0; i < 16; ++i) dot += two.values[i] * five.values[i];
    CHECK(dot < 1.0 - 1e-6); // cosine < 1 for distinct token sets
}

TEST_CASE("empty labels are rejected") {
    CHECK_THROWS_AS(toy_text_embed(LabelPrompt{""}, 16), ParameterError);
    CHECK_THROWS_AS(toy_text_embed(LabelPrompt{"   \t  "}, 16), ParameterError);
}

TEST_CASE("image embedder is frozen per seed and scale invariant") {
    ToyImageEmbedder e1(16), e2(16);
    SeededRng rng(1);
    Image img = oracles::random_image(rng, 16, 16, 0.1, 1.0);
    CHECK(e1.embed(img).values == e2.embed(img).values);

    Image scaled(16, 16);
    for (std::size_t i = 0; i < img.size(); ++i) scaled.pixels()[i] = 3.7 * img.pixels()[i];
    ConditioningEmbedding za = e1.embed(img);
    ConditioningEmbedding zb = e1.embed(scaled);
    for (int i = 0; i < 16; ++i) CHECK(za.values[i] == doctest::Approx(zb.values[i]).epsilon(1e-12));

    ToyImageEmbedder other_seed(16, 999);
    CHECK(other_seed.embed(img).values != za.values);
}

TEST_CASE("image embedder gradient matches finite differences") {
    ToyImageEmbedder embedder(8);
    SeededRng rng(2);
    Image img = oracles::random_image(rng, 12, 12, 0.1, 1.0);
    std::vector<double> upstream(8);
    for (double& v : upstream) v = rng.next_normal();

    Image analytic = embedder.pixel_grad(img, upstream);
    auto objective = [&]() {
        auto z = embedder.embed(img).values;
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) acc += z[i] * upstream[i];
        return acc;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double numeric = oracles::central_difference(&img.pixels()[i], objective);
        worst = std::max(worst, oracles::rel_err(analytic.pixels()[i], numeric));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("external embeddings round trip and enforce dims") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "awdiff_embed.awt").string();
    RawTensor t;
    t.dims = {16};
    SeededRng rng(3);
    t.values.resize(16);
    for (double& v : t.values) v = rng.next_normal();
    write_raw_tensor(path, t);

    ConditioningEmbedding z = load_external_embedding(path, 16);
    CHECK(z.values == t.values);
    CHECK(z.source == EmbeddingSource::ExternalFile);

    SUBCASE("dim mismatch names both dims") {
        try {
            load_external_embedding(path, 8);
            FAIL("expected a FormatError");
        } catch (const FormatError& e) {
            std::string msg = e.what();
            CHECK(msg.find("16") != std::string::npos);
            CHECK(msg.find("8") != std::string::npos);
        }
    }

    SUBCASE("wrong rank is a format error") {
        RawTensor bad;
        bad.dims = {4, 4};
        bad.values.assign(16, 0.0);
        write_raw_tensor(path, bad);
        CHECK_THROWS_AS(load_external_embedding(path, 16), FormatError);
    }

    SUBCASE("a zero vector loads fine") {
        RawTensor zero;
        zero.dims = {16};
        zero.values.assign(16, 0.0);
        write_raw_tensor(path, zero);
        ConditioningEmbedding zz = load_external_embedding(path, 16);
        CHECK(zz.norm() == 0.0);
    }
}

TEST_CASE("cosine alignment loss fixed points") {
    ConditioningEmbedding u{{1.0, 2.0, -1.0}, EmbeddingSource::ToyImage};
    ConditioningEmbedding v{{1.0, 2.0, -1.0}, EmbeddingSource::ToyText};
    CHECK(cosine_alignment_loss(u, v) == doctest::Approx(0.0).epsilon(1e-14));

    ConditioningEmbedding neg{{-1.0, -2.0, 1.0}, EmbeddingSource::ToyText};
    CHECK(cosine_alignment_loss(u, neg) == doctest::Approx(2.0).epsilon(1e-14));

    ConditioningEmbedding ex{{1.0, 0.0}, EmbeddingSource::ToyImage};
    ConditioningEmbedding ey{{0.0, 1.0}, EmbeddingSource::ToyText};
    CHECK(cosine_alignment_loss(ex, ey) == doctest::Approx(1.0).epsilon(1e-14));

    ConditioningEmbedding zero{{0.0, 0.0}, EmbeddingSource::ToyText};
    CHECK_THROWS_AS(cosine_alignment_loss(ex, zero), ParameterError);
    ConditioningEmbedding short_dim{{1.0}, EmbeddingSource::ToyText};
    CHECK_THROWS_AS(cosine_alignment_loss(ex, short_dim), InvariantError);
}

TEST_CASE("cosine loss is scale invariant in both arguments") {
    SeededRng rng(4);
    std::vector<double> a(8), b(8);
    for (double& v : a) v = rng.next_normal();
    for (double& v : b) v = rng.next_normal();
    ConditioningEmbedding u{a, EmbeddingSource::ToyImage};
    ConditioningEmbedding v{b, EmbeddingSource::ToyText};
    const double base = cosine_alignment_loss(u, v);
    for (double sa : {0.3, 7.0}) {
        for (double sb : {0.01, 5.0}) {
            ConditioningEmbedding us = u, vs = v;
            for (double& x : us.values) x *= sa;
            for (double& x : vs.values) x *= sb;
            CHECK(cosine_alignment_loss(us, vs) == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("cosine gradient matches finite differences") {
    SeededRng rng(5);
    std::vector<double> a(6), b(6);
    for (double& v : a) v = rng.next_normal();
    for (double& v : b) v = rng.next_normal();
    ConditioningEmbedding u{a, EmbeddingSource::ToyImage};
    ConditioningEmbedding v{b, EmbeddingSource::ToyText};
    std::vector<double> grad = cosine_alignment_loss_grad(u, v);
    for (int i = 0; i < 6; ++i) {
        const double numeric = oracles::central_difference(
            &u.values[i], [&]() { return cosine_alignment_loss(u, v); });
        CHECK(oracles::rel_err(grad[i], numeric) < 1e-6);
    }
}

TEST_CASE("pixels to embedding to cosine loss composite gradient") {
    ToyImageEmbedder embedder(8);
    ConditioningEmbedding target = toy_text_embed(LabelPrompt{"composite target"}, 8);
    SeededRng rng(6);
    Image img = oracles::random_image(rng, 16, 16, 0.1, 1.0);

    ConditioningEmbedding z = embedder.embed(img);
    std::vector<double> dz = cosine_alignment_loss_grad(z, target);
    Image analytic = embedder.pixel_grad(img, dz);

    auto objective = [&]() { return cosine_alignment_loss(embedder.embed(img), target); };
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double numeric = oracles::central_difference(&img.pixels()[i], objective);
        worst = std::max(worst, oracles::rel_err(analytic.pixels()[i], numeric));
    }
    CHECK(worst < 1e-4);
}
