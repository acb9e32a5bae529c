#include "awdiff/denoiser.hpp"

#include <cmath>

namespace awdiff {

void ArchitectureConfig::validate() const {
    if (channels < 1) throw ParameterError("channels must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ParameterError("kernel_size must be odd");
    if (stages < 1) throw ParameterError("stages must be >= 1");
    if (embed_dim < 1) throw ParameterError("embed_dim must be positive");
    if (fusion_heads != 1) throw ParameterError("only single-head fusion is supported");
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
        throw ParameterError("time_embed_dim must be even and >= 2");
    if (wavelet_scales < 1 || wavelet_scales > 8)
        throw ParameterError("wavelet_scales must lie in [1, 8]");
}

namespace {

struct BlockSpec {
    std::string name;
    std::vector<std::uint32_t> dims;
    double init_std; // 0 => zero init
};

std::vector<BlockSpec> block_specs(const ArchitectureConfig& a) {
    const auto u = [](int v) { return static_cast<std::uint32_t>(v); };
    const int c_in = a.wavelet_scales + 1;
    auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
    auto proj = [](int fan_in) { return std::sqrt(1.0 / fan_in); };

    std::vector<BlockSpec> specs;
    specs.push_back({"stem.w", {u(a.channels), u(c_in), u(a.kernel_size), u(a.kernel_size)},
                     he(c_in * a.kernel_size * a.kernel_size)});
    specs.push_back({"stem.b", {u(a.channels)}, 0.0});
    specs.push_back({"time.w", {u(a.channels), u(a.time_embed_dim)}, proj(a.time_embed_dim)});
    specs.push_back({"time.b", {u(a.channels)}, 0.0});
    for (int s = 1; s <= a.stages; ++s) {
        const std::string prefix = "res" + std::to_string(s);
        const double std_cc = he(a.channels * a.kernel_size * a.kernel_size);
        specs.push_back({prefix + ".conv1.w",
                         {u(a.channels), u(a.channels), u(a.kernel_size), u(a.kernel_size)}, std_cc});
        specs.push_back({prefix + ".conv1.b", {u(a.channels)}, 0.0});
        specs.push_back({prefix + ".conv2.w",
                         {u(a.channels), u(a.channels), u(a.kernel_size), u(a.kernel_size)}, std_cc});
        specs.push_back({prefix + ".conv2.b", {u(a.channels)}, 0.0});
    }
    const double fusion_std = proj(a.embed_dim);
    specs.push_back({"fuse.wq", {u(a.embed_dim), u(a.channels)}, fusion_std});
    specs.push_back({"fuse.wk", {u(a.embed_dim), u(a.embed_dim)}, fusion_std});
    specs.push_back({"fuse.wv", {u(a.embed_dim), u(a.embed_dim)}, fusion_std});
    specs.push_back({"fuse.wstat", {u(a.embed_dim), 2}, fusion_std});
    specs.push_back({"fuse.wo", {u(a.channels), u(a.embed_dim)}, fusion_std});
    specs.push_back({"head.w", {1, u(a.channels), u(a.kernel_size), u(a.kernel_size)},
                     he(a.channels * a.kernel_size * a.kernel_size)});
    specs.push_back({"head.b", {1}, 0.0});
    return specs;
}

std::vector<double> sinusoidal_time_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<double> emb(dim);
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        emb[2 * i] = std::sin(t * freq);
        emb[2 * i + 1] = std::cos(t * freq);
    }
    return emb;
}

} // namespace

std::size_t ArchitectureConfig::parameter_count() const {
    validate();
    std::size_t n = 0;
    for (const auto& spec : block_specs(*this)) {
        std::size_t c = 1;
        for (auto d : spec.dims) c *= d;
        n += c;
    }
    return n;
}

DenoiserParams init_params(const ArchitectureConfig& arch, SeededRng& rng) {
    arch.validate();
    DenoiserParams p;
    p.arch = arch;
    for (const auto& spec : block_specs(arch)) {
        TensorBlock b;
        b.name = spec.name;
        b.dims = spec.dims;
        std::size_t c = 1;
        for (auto d : spec.dims) c *= d;
        b.values.assign(c, 0.0);
        if (spec.init_std > 0.0)
            for (auto& v : b.values) v = spec.init_std * rng.next_normal();
        p.set.blocks.push_back(std::move(b));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward graph
// ---------------------------------------------------------------------------

namespace {

struct ForwardGraph {
    std::vector<Tape::Var> param_vars; // in block order
    Tape::Var out;
};

ForwardGraph build_forward(Tape& tape, const DenoiserParams& params, const Image& x_t, int t,
                           const ConditioningEmbedding& z_y, const WaveletPyramid& f) {
    const ArchitectureConfig& a = params.arch;
    a.validate();
    if (t < 1) throw ParameterError("timestep must be >= 1");
    if (f.scales() != a.wavelet_scales)
        throw InvariantError("wavelet feature scales do not match the architecture");
    if (z_y.dim() != a.embed_dim)
        throw InvariantError("conditioning embedding dim does not match the architecture");
    if (f.width() != x_t.width() || f.height() != x_t.height())
        throw InvariantError("wavelet feature dims do not match x_t");

    const int h = x_t.height(), w = x_t.width();
    const int c_in = a.wavelet_scales + 1;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    // Input stack: x_t then WP^(1)..WP^(S).
    std::vector<double> stacked;
    stacked.reserve(c_in * plane);
    stacked.insert(stacked.end(), x_t.pixels().begin(), x_t.pixels().end());
    for (const Image& p : f.planes)
        stacked.insert(stacked.end(), p.pixels().begin(), p.pixels().end());
    Tape::Var input = tape.leaf(std::move(stacked), {c_in, h, w});

    // Parameter leaves, same order as the block list.
    ForwardGraph g;
    std::size_t bi = 0;
    auto next_block = [&](const char* expected) -> Tape::Var {
        const TensorBlock& b = params.set.blocks.at(bi++);
        if (b.name != expected) throw InvariantError("unexpected block order: " + b.name);
        Tape::Var v = tape.leaf(b.values, {static_cast<int>(b.count()), 1, 1});
        g.param_vars.push_back(v);
        return v;
    };

    Tape::Var stem_w = next_block("stem.w");
    Tape::Var stem_b = next_block("stem.b");
    Tape::Var time_w = next_block("time.w");
    Tape::Var time_b = next_block("time.b");
    struct ResVars {
        Tape::Var w1, b1, w2, b2;
    };
    std::vector<ResVars> res(a.stages);
    for (int s = 0; s < a.stages; ++s) {
        const std::string prefix = "res" + std::to_string(s + 1);
        res[s].w1 = next_block((prefix + ".conv1.w").c_str());
        res[s].b1 = next_block((prefix + ".conv1.b").c_str());
        res[s].w2 = next_block((prefix + ".conv2.w").c_str());
        res[s].b2 = next_block((prefix + ".conv2.b").c_str());
    }
    Tape::Var wq = next_block("fuse.wq");
    Tape::Var wk = next_block("fuse.wk");
    Tape::Var wv = next_block("fuse.wv");
    Tape::Var wstat = next_block("fuse.wstat");
    Tape::Var wo = next_block("fuse.wo");
    Tape::Var head_w = next_block("head.w");
    Tape::Var head_b = next_block("head.b");

    // Stem with additive time conditioning.
    Tape::Var hvar = tape.conv2d_same(input, stem_w, stem_b, a.channels, a.kernel_size);
    Tape::Var temb = tape.leaf_vector(sinusoidal_time_embedding(t, a.time_embed_dim));
    Tape::Var tproj = tape.matvec(time_w, temb, a.channels, a.time_embed_dim);
    Tape::Var tvec = tape.add(tproj, time_b);
    hvar = tape.add_channel_bias(hvar, tvec);
    hvar = tape.silu(hvar);

    auto residual_block = [&](Tape::Var x, const ResVars& rv) {
        Tape::Var r = tape.conv2d_same(x, rv.w1, rv.b1, a.channels, a.kernel_size);
        r = tape.silu(r);
        r = tape.conv2d_same(r, rv.w2, rv.b2, a.channels, a.kernel_size);
        return tape.add(x, r);
    };

    hvar = residual_block(hvar, res[0]);

    // Fusion: one query from the channel descriptors; keys/values from the
    // text embedding token plus one pooled-statistics token per plane.
    {
        Tape::Var desc = tape.spatial_mean(hvar);
        Tape::Var q = tape.matvec(wq, desc, a.embed_dim, a.channels);
        std::vector<Tape::Var> tokens;
        tokens.push_back(tape.leaf_vector(z_y.values));
        for (const Image& p : f.planes) {
            double mean = 0.0, meansq = 0.0;
            for (double v : p.pixels()) {
                mean += v;
                meansq += v * v;
            }
            mean /= static_cast<double>(p.size());
            meansq /= static_cast<double>(p.size());
            Tape::Var stats = tape.leaf_vector({mean, meansq});
            tokens.push_back(tape.matvec(wstat, stats, a.embed_dim, 2));
        }
        std::vector<Tape::Var> logits;
        std::vector<Tape::Var> vals;
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(a.embed_dim));
        for (Tape::Var tok : tokens) {
            Tape::Var key = tape.matvec(wk, tok, a.embed_dim, a.embed_dim);
            vals.push_back(tape.matvec(wv, tok, a.embed_dim, a.embed_dim));
            logits.push_back(tape.scale(tape.dot(q, key), inv_sqrt_d));
        }
        Tape::Var attn = tape.softmax(tape.stack_scalars(logits));
        Tape::Var ctx = tape.weighted_sum(attn, vals);
        Tape::Var fbias = tape.matvec(wo, ctx, a.channels, a.embed_dim);
        hvar = tape.add_channel_bias(hvar, fbias);
    }

    for (int s = 1; s < a.stages; ++s) hvar = residual_block(hvar, res[s]);

    g.out = tape.conv2d_same(hvar, head_w, head_b, 1, a.kernel_size);
    return g;
}

} // namespace

DenoiserEval::DenoiserEval(const DenoiserParams& params, const Image& x_t, int t,
                           const ConditioningEmbedding& z_y, const WaveletPyramid& f)
    : tape_(std::make_unique<Tape>()), params_(&params) {
    ForwardGraph g = build_forward(*tape_, params, x_t, t, z_y, f);
    param_vars_ = std::move(g.param_vars);
    out_var_ = g.out;
    const std::vector<double>& out = tape_->value(out_var_);
    for (double v : out)
        if (!std::isfinite(v))
            throw DivergenceError("denoiser forward produced a non-finite activation");
    output_ = Image(x_t.width(), x_t.height(), out);
}

ParamSet DenoiserEval::backward(const Image& upstream) {
    if (upstream.width() != output_.width() || upstream.height() != output_.height())
        throw InvariantError("upstream gradient dims do not match the output");
    tape_->backward(out_var_, upstream.pixels());
    ParamSet grads;
    grads.blocks.reserve(params_->set.blocks.size());
    for (std::size_t i = 0; i < params_->set.blocks.size(); ++i) {
        TensorBlock b;
        b.name = params_->set.blocks[i].name;
        b.dims = params_->set.blocks[i].dims;
        b.values = tape_->grad(param_vars_[i]);
        grads.blocks.push_back(std::move(b));
    }
    return grads;
}

Image denoiser_forward(const DenoiserParams& params, const Image& x_t, int t,
                       const ConditioningEmbedding& z_y, const WaveletPyramid& f) {
    DenoiserEval eval(params, x_t, t, z_y, f);
    return eval.output();
}

ParamSet denoiser_backward(const DenoiserParams& params, const Image& x_t, int t,
                           const ConditioningEmbedding& z_y, const WaveletPyramid& f,
                           const Image& upstream_grad) {
    DenoiserEval eval(params, x_t, t, z_y, f);
    return eval.backward(upstream_grad);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState make_adam_state(const DenoiserParams& params) {
    AdamState s;
    s.m = params.set;
    s.v = params.set;
    s.m.fill(0.0);
    s.v.fill(0.0);
    s.step = 0;
    return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps_hat) {
    params.require_same_shape(grads, "adam_step");
    params.require_same_shape(state.m, "adam_step");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        auto& theta = params.blocks[i].values;
        const auto& g = grads.blocks[i].values;
        auto& m = state.m.blocks[i].values;
        auto& v = state.v.blocks[i].values;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= lr * m_hat / (std::sqrt(v_hat) + eps_hat);
        }
    }
}

} // namespace awdiff
