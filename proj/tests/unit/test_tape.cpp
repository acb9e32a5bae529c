#include <functional>

#include "doctest.h"

#include "awdiff/tape.hpp"
#include "oracles.hpp"

using namespace awdiff;

namespace {

// Finite-difference check of d(sum(output * weights))/d(leaf values) for a
// graph builder that maps leaf buffers to one output var.
void check_graph_gradients(
    std::vector<std::pair<std::vector<double>, Tape::Shape>> leaves,
    const std::function<Tape::Var(Tape&, const std::vector<Tape::Var>&)>& build,
    double tol = 1e-5) {
    // Analytic gradients.
    Tape tape;
    std::vector<Tape::Var> vars;
    for (auto& [vals, shape] : leaves) vars.push_back(tape.leaf(vals, shape));
    Tape::Var out = build(tape, vars);
    std::vector<double> weights(tape.value(out).size());
    SeededRng wrng(99);
    for (double& w : weights) w = wrng.next_uniform() - 0.5;
    tape.backward(out, weights);

    auto objective = [&](const std::vector<std::pair<std::vector<double>, Tape::Shape>>& ls) {
        Tape t2;
        std::vector<Tape::Var> vs;
        for (const auto& [vals, shape] : ls) vs.push_back(t2.leaf(vals, shape));
        Tape::Var o = build(t2, vs);
        const auto& val = t2.value(o);
        double acc = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) acc += val[i] * weights[i];
        return acc;
    };

    for (std::size_t l = 0; l < leaves.size(); ++l) {
        for (std::size_t j = 0; j < leaves[l].first.size(); ++j) {
            auto perturbed = leaves;
            const double numeric = oracles::central_difference(
                &perturbed[l].first[j], [&]() { return objective(perturbed); });
            const double analytic = tape.grad(vars[l])[j];
            CHECK(oracles::rel_err(analytic, numeric) < tol);
        }
    }
}

std::vector<double> random_values(std::size_t n, SeededRng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.next_normal();
    return v;
}

} // namespace

TEST_CASE("conv2d_same gradients match finite differences") {
    SeededRng rng(1);
    const int c_in = 2, c_out = 3, h = 5, w = 4, k = 3;
    check_graph_gradients(
        {{random_values(c_in * h * w, rng), {c_in, h, w}},
         {random_values(c_out * c_in * k * k, rng, 0.5), {c_out * c_in * k * k, 1, 1}},
         {random_values(c_out, rng, 0.1), {c_out, 1, 1}}},
        [=](Tape& t, const std::vector<Tape::Var>& v) {
            return t.conv2d_same(v[0], v[1], v[2], c_out, k);
        });
}

TEST_CASE("silu and add gradients") {
    SeededRng rng(2);
    check_graph_gradients(
        {{random_values(12, rng), {3, 2, 2}}, {random_values(12, rng), {3, 2, 2}}},
        [](Tape& t, const std::vector<Tape::Var>& v) { return t.silu(t.add(v[0], v[1])); });
}

TEST_CASE("channel bias and spatial mean gradients") {
    SeededRng rng(3);
    check_graph_gradients(
        {{random_values(18, rng), {2, 3, 3}}, {random_values(2, rng), {2, 1, 1}}},
        [](Tape& t, const std::vector<Tape::Var>& v) {
            return t.spatial_mean(t.add_channel_bias(v[0], v[1]));
        });
}

TEST_CASE("matvec, dot, softmax and weighted sum gradients") {
    SeededRng rng(4);
    const int m = 3, n = 4;
    check_graph_gradients(
        {{random_values(m * n, rng), {m * n, 1, 1}},
         {random_values(n, rng), {n, 1, 1}},
         {random_values(m, rng), {m, 1, 1}},
         {random_values(m, rng), {m, 1, 1}}},
        [=](Tape& t, const std::vector<Tape::Var>& v) {
            Tape::Var y = t.matvec(v[0], v[1], m, n);           // [m]
            Tape::Var s1 = t.scale(t.dot(y, v[2]), 0.7);        // scalar
            Tape::Var s2 = t.dot(y, v[3]);                       // scalar
            Tape::Var s3 = t.dot(v[2], v[3]);                    // scalar
            Tape::Var p = t.softmax(t.stack_scalars({s1, s2, s3}));
            return t.weighted_sum(p, {v[2], v[3], y});
        });
}

TEST_CASE("backward rejects a mismatched output gradient") {
    Tape tape;
    Tape::Var a = tape.leaf({1.0, 2.0}, {2, 1, 1});
    Tape::Var out = tape.scale(a, 2.0);
    CHECK_THROWS_AS(tape.backward(out, {1.0}), InvariantError);
}
