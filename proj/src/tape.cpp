#include "awdiff/tape.hpp"

#include <algorithm>
#include <cmath>

namespace awdiff {

Tape::Var Tape::push(std::vector<double> value, Shape shape, std::function<void()> backward_fn) {
    values_.push_back(std::move(value));
    shapes_.push_back(shape);
    backward_fns_.push_back(std::move(backward_fn));
    return Var{static_cast<int>(values_.size()) - 1};
}

Tape::Var Tape::leaf(std::vector<double> value, Shape shape) {
    if (value.size() != shape.count()) throw InvariantError("tape leaf: size/shape mismatch");
    return push(std::move(value), shape, nullptr);
}

Tape::Var Tape::leaf_vector(std::vector<double> value) {
    Shape s{static_cast<int>(value.size()), 1, 1};
    return push(std::move(value), s, nullptr);
}

Tape::Var Tape::conv2d_same(Var input, Var weights, Var bias, int c_out, int k) {
    const Shape in_shape = shape(input);
    const int c_in = in_shape.c, h = in_shape.h, w = in_shape.w;
    const int r = k / 2;
    if (shape(weights).count() != static_cast<std::size_t>(c_out) * c_in * k * k)
        throw InvariantError("conv2d: weight count mismatch");
    if (shape(bias).count() != static_cast<std::size_t>(c_out))
        throw InvariantError("conv2d: bias count mismatch");

    const std::vector<double>& in = values_[input.idx];
    const std::vector<double>& wt = values_[weights.idx];
    const std::vector<double>& b = values_[bias.idx];
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    std::vector<double> out(static_cast<std::size_t>(c_out) * plane);
    for (int o = 0; o < c_out; ++o)
        std::fill_n(out.begin() + o * plane, plane, b[o]);
    for (int o = 0; o < c_out; ++o) {
        double* out_plane = out.data() + o * plane;
        for (int i = 0; i < c_in; ++i) {
            const double* in_plane = in.data() + i * plane;
            for (int dy = -r; dy <= r; ++dy) {
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int dx = -r; dx <= r; ++dx) {
                    const double tap = wt[((static_cast<std::size_t>(o) * c_in + i) * k + (dy + r)) * k + (dx + r)];
                    if (tap == 0.0) continue;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int y = y0; y < y1; ++y) {
                        double* orow = out_plane + static_cast<std::size_t>(y) * w;
                        const double* irow = in_plane + static_cast<std::size_t>(y + dy) * w + dx;
                        for (int x = x0; x < x1; ++x) orow[x] += tap * irow[x];
                    }
                }
            }
        }
    }

    Var result = push(std::move(out), Shape{c_out, h, w}, nullptr);
    backward_fns_[result.idx] = [this, input, weights, bias, result, c_out, c_in, h, w, k, r, plane]() {
        const std::vector<double>& g = grads_[result.idx];
        const std::vector<double>& in = values_[input.idx];
        const std::vector<double>& wt = values_[weights.idx];
        std::vector<double>& din = grads_[input.idx];
        std::vector<double>& dwt = grads_[weights.idx];
        std::vector<double>& db = grads_[bias.idx];
        for (int o = 0; o < c_out; ++o) {
            const double* g_plane = g.data() + o * plane;
            double acc = 0.0;
            for (std::size_t s = 0; s < plane; ++s) acc += g_plane[s];
            db[o] += acc;
            for (int i = 0; i < c_in; ++i) {
                const double* in_plane = in.data() + i * plane;
                double* din_plane = din.data() + i * plane;
                for (int dy = -r; dy <= r; ++dy) {
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    for (int dx = -r; dx <= r; ++dx) {
                        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                        const std::size_t widx =
                            ((static_cast<std::size_t>(o) * c_in + i) * k + (dy + r)) * k + (dx + r);
                        const double tap = wt[widx];
                        double wacc = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            const double* grow = g_plane + static_cast<std::size_t>(y) * w;
                            const double* irow = in_plane + static_cast<std::size_t>(y + dy) * w + dx;
                            double* drow = din_plane + static_cast<std::size_t>(y + dy) * w + dx;
                            for (int x = x0; x < x1; ++x) {
                                wacc += grow[x] * irow[x];
                                drow[x] += tap * grow[x];
                            }
                        }
                        dwt[widx] += wacc;
                    }
                }
            }
        }
    };
    return result;
}

Tape::Var Tape::add(Var a, Var b) {
    if (!(shape(a) == shape(b))) throw InvariantError("tape add: shape mismatch");
    std::vector<double> out = values_[a.idx];
    const std::vector<double>& vb = values_[b.idx];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    Var result = push(std::move(out), shape(a), nullptr);
    backward_fns_[result.idx] = [this, a, b, result]() {
        const std::vector<double>& g = grads_[result.idx];
        std::vector<double>& da = grads_[a.idx];
        std::vector<double>& db = grads_[b.idx];
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += g[i];
            db[i] += g[i];
        }
    };
    return result;
}

Tape::Var Tape::add_channel_bias(Var x, Var bias) {
    const Shape s = shape(x);
    if (shape(bias).count() != static_cast<std::size_t>(s.c))
        throw InvariantError("add_channel_bias: bias length must equal channel count");
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    std::vector<double> out = values_[x.idx];
    const std::vector<double>& b = values_[bias.idx];
    for (int c = 0; c < s.c; ++c) {
        double* p = out.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
    }
    Var result = push(std::move(out), s, nullptr);
    backward_fns_[result.idx] = [this, x, bias, result, s, plane]() {
        const std::vector<double>& g = grads_[result.idx];
        std::vector<double>& dx = grads_[x.idx];
        std::vector<double>& db = grads_[bias.idx];
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        for (int c = 0; c < s.c; ++c) {
            const double* gp = g.data() + c * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
            db[c] += acc;
        }
    };
    return result;
}

Tape::Var Tape::silu(Var x) {
    const std::vector<double>& in = values_[x.idx];
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        double sig = 1.0 / (1.0 + std::exp(-in[i]));
        out[i] = in[i] * sig;
    }
    Var result = push(std::move(out), shape(x), nullptr);
    backward_fns_[result.idx] = [this, x, result]() {
        const std::vector<double>& g = grads_[result.idx];
        const std::vector<double>& in = values_[x.idx];
        std::vector<double>& dx = grads_[x.idx];
        for (std::size_t i = 0; i < g.size(); ++i) {
            double sig = 1.0 / (1.0 + std::exp(-in[i]));
            dx[i] += g[i] * sig * (1.0 + in[i] * (1.0 - sig));
        }
    };
    return result;
}

Tape::Var Tape::spatial_mean(Var x) {
    const Shape s = shape(x);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const std::vector<double>& in = values_[x.idx];
    std::vector<double> out(s.c);
    for (int c = 0; c < s.c; ++c) {
        const double* p = in.data() + c * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        out[c] = acc / static_cast<double>(plane);
    }
    Var result = push(std::move(out), Shape{s.c, 1, 1}, nullptr);
    backward_fns_[result.idx] = [this, x, result, s, plane]() {
        const std::vector<double>& g = grads_[result.idx];
        std::vector<double>& dx = grads_[x.idx];
        for (int c = 0; c < s.c; ++c) {
            double gc = g[c] / static_cast<double>(plane);
            double* p = dx.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] += gc;
        }
    };
    return result;
}

Tape::Var Tape::matvec(Var w, Var v, int m, int n) {
    if (shape(w).count() != static_cast<std::size_t>(m) * n || shape(v).count() != static_cast<std::size_t>(n))
        throw InvariantError("matvec: shape mismatch");
    const std::vector<double>& mat = values_[w.idx];
    const std::vector<double>& vec = values_[v.idx];
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += mat[static_cast<std::size_t>(i) * n + j] * vec[j];
        out[i] = acc;
    }
    Var result = push(std::move(out), Shape{m, 1, 1}, nullptr);
    backward_fns_[result.idx] = [this, w, v, result, m, n]() {
        const std::vector<double>& g = grads_[result.idx];
        const std::vector<double>& mat = values_[w.idx];
        const std::vector<double>& vec = values_[v.idx];
        std::vector<double>& dmat = grads_[w.idx];
        std::vector<double>& dvec = grads_[v.idx];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                dmat[static_cast<std::size_t>(i) * n + j] += g[i] * vec[j];
                dvec[j] += g[i] * mat[static_cast<std::size_t>(i) * n + j];
            }
        }
    };
    return result;
}

Tape::Var Tape::dot(Var a, Var b) {
    if (shape(a).count() != shape(b).count()) throw InvariantError("dot: length mismatch");
    const std::vector<double>& va = values_[a.idx];
    const std::vector<double>& vb = values_[b.idx];
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    Var result = push({acc}, Shape{1, 1, 1}, nullptr);
    backward_fns_[result.idx] = [this, a, b, result]() {
        const double g = grads_[result.idx][0];
        const std::vector<double>& va = values_[a.idx];
        const std::vector<double>& vb = values_[b.idx];
        std::vector<double>& da = grads_[a.idx];
        std::vector<double>& db = grads_[b.idx];
        for (std::size_t i = 0; i < va.size(); ++i) {
            da[i] += g * vb[i];
            db[i] += g * va[i];
        }
    };
    return result;
}

Tape::Var Tape::scale(Var x, double factor) {
    std::vector<double> out = values_[x.idx];
    for (double& v : out) v *= factor;
    Var result = push(std::move(out), shape(x), nullptr);
    backward_fns_[result.idx] = [this, x, result, factor]() {
        const std::vector<double>& g = grads_[result.idx];
        std::vector<double>& dx = grads_[x.idx];
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += factor * g[i];
    };
    return result;
}

Tape::Var Tape::stack_scalars(const std::vector<Var>& scalars) {
    std::vector<double> out(scalars.size());
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (shape(scalars[i]).count() != 1) throw InvariantError("stack_scalars: non-scalar input");
        out[i] = values_[scalars[i].idx][0];
    }
    Var result = push(std::move(out), Shape{static_cast<int>(scalars.size()), 1, 1}, nullptr);
    std::vector<Var> inputs = scalars;
    backward_fns_[result.idx] = [this, inputs, result]() {
        const std::vector<double>& g = grads_[result.idx];
        for (std::size_t i = 0; i < inputs.size(); ++i) grads_[inputs[i].idx][0] += g[i];
    };
    return result;
}

Tape::Var Tape::softmax(Var logits) {
    const std::vector<double>& in = values_[logits.idx];
    double mx = in[0];
    for (double v : in) mx = std::max(mx, v);
    std::vector<double> out(in.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    Var result = push(std::move(out), shape(logits), nullptr);
    backward_fns_[result.idx] = [this, logits, result]() {
        const std::vector<double>& g = grads_[result.idx];
        const std::vector<double>& p = values_[result.idx];
        std::vector<double>& dl = grads_[logits.idx];
        double pg = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) pg += p[i] * g[i];
        for (std::size_t i = 0; i < g.size(); ++i) dl[i] += p[i] * (g[i] - pg);
    };
    return result;
}

Tape::Var Tape::weighted_sum(Var weights, const std::vector<Var>& vectors) {
    const std::size_t m = shape(weights).count();
    if (m != vectors.size()) throw InvariantError("weighted_sum: weight/vector count mismatch");
    const std::size_t d = shape(vectors[0]).count();
    const std::vector<double>& wv = values_[weights.idx];
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const std::vector<double>& vj = values_[vectors[j].idx];
        if (vj.size() != d) throw InvariantError("weighted_sum: vector length mismatch");
        for (std::size_t i = 0; i < d; ++i) out[i] += wv[j] * vj[i];
    }
    Var result = push(std::move(out), Shape{static_cast<int>(d), 1, 1}, nullptr);
    std::vector<Var> inputs = vectors;
    backward_fns_[result.idx] = [this, weights, inputs, result, m, d]() {
        const std::vector<double>& g = grads_[result.idx];
        const std::vector<double>& wv = values_[weights.idx];
        std::vector<double>& dw = grads_[weights.idx];
        for (std::size_t j = 0; j < m; ++j) {
            const std::vector<double>& vj = values_[inputs[j].idx];
            std::vector<double>& dvj = grads_[inputs[j].idx];
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                acc += g[i] * vj[i];
                dvj[i] += wv[j] * g[i];
            }
            dw[j] += acc;
        }
    };
    return result;
}

void Tape::backward(Var output, const std::vector<double>& output_grad) {
    if (output_grad.size() != values_[output.idx].size())
        throw InvariantError("backward: output gradient size mismatch");
    grads_.clear();
    grads_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) grads_[i].assign(values_[i].size(), 0.0);
    grads_[output.idx] = output_grad;
    for (int i = output.idx; i >= 0; --i)
        if (backward_fns_[i]) backward_fns_[i]();
}

} // namespace awdiff
