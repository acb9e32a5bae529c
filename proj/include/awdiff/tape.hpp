#pragma once

#include <functional>
#include <vector>

#include "awdiff/errors.hpp"

namespace awdiff {

/// Minimal reverse-mode tape over the fixed operator set the denoiser
/// needs: conv2d-same, elementwise add, per-channel broadcast add, SiLU,
/// matrix-vector products, dot products, softmax and spatial means.
///
/// Values are flat double buffers with explicit shapes; a Var is an index
/// into the tape. backward() walks the nodes in reverse and accumulates
/// gradients for every node, so leaf gradients can be read back directly.
class Tape {
  public:
    Tape() = default;
    // Backward closures capture `this`; the tape must stay put.
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    struct Var {
        int idx = -1;
    };

    /// Shape bookkeeping: feature maps carry (c,h,w); vectors carry (n,1,1).
    struct Shape {
        int c = 1, h = 1, w = 1;
        std::size_t count() const { return static_cast<std::size_t>(c) * h * w; }
        bool operator==(const Shape&) const = default;
    };

    Var leaf(std::vector<double> value, Shape shape);
    Var leaf_vector(std::vector<double> value);

    const std::vector<double>& value(Var v) const { return values_[v.idx]; }
    const Shape& shape(Var v) const { return shapes_[v.idx]; }
    const std::vector<double>& grad(Var v) const { return grads_[v.idx]; }

    /// Cross-correlation with zero padding, stride 1, output dims = input
    /// dims. weights shape (c_out, c_in, k, k) flat, bias length c_out.
    Var conv2d_same(Var input, Var weights, Var bias, int c_out, int k);

    Var add(Var a, Var b);

    /// x[c,h,w] + bias[c] broadcast over the spatial extent.
    Var add_channel_bias(Var x, Var bias);

    /// x * sigmoid(x), elementwise.
    Var silu(Var x);

    /// Per-channel spatial mean of a (c,h,w) map -> vector of length c.
    Var spatial_mean(Var x);

    /// W (m x n, flat row-major) times vector v (n) -> vector (m).
    Var matvec(Var w, Var v, int m, int n);

    Var dot(Var a, Var b);

    Var scale(Var x, double factor);

    /// Gathers scalars into one vector.
    Var stack_scalars(const std::vector<Var>& scalars);

    Var softmax(Var logits);

    /// sum_j weights[j] * vectors[j]; all vectors share one length.
    Var weighted_sum(Var weights, const std::vector<Var>& vectors);

    /// Seeds the output gradient and runs the reverse sweep.
    void backward(Var output, const std::vector<double>& output_grad);

  private:
    Var push(std::vector<double> value, Shape shape, std::function<void()> backward_fn);

    std::vector<std::vector<double>> values_;
    std::vector<std::vector<double>> grads_;
    std::vector<Shape> shapes_;
    std::vector<std::function<void()>> backward_fns_;
};

} // namespace awdiff
