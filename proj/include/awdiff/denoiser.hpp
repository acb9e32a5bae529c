#pragma once

#include <memory>

#include "awdiff/conditioning.hpp"
#include "awdiff/image.hpp"
#include "awdiff/params.hpp"
#include "awdiff/tape.hpp"
#include "awdiff/wavelet.hpp"

namespace awdiff {

/// Compact non-downsampling conditional denoiser: the noisy image and the
/// wavelet planes enter as channels, the timestep as a sinusoidal embedding
/// added per channel after the stem, and the text embedding through a
/// single-head cross-attention whose keys/values come from the embedding
/// plus pooled per-plane statistics. Spatial resolution never changes.
struct ArchitectureConfig {
    int channels = 16;      // feature channels throughout
    int kernel_size = 3;    // odd
    int stages = 2;         // residual conv blocks
    int embed_dim = 16;     // d_e, must match the conditioning embedding
    int fusion_heads = 1;   // single-head attention only
    int time_embed_dim = 32;
    int wavelet_scales = 4; // S; input channels = S + 1

    void validate() const;

    /// Deterministic total number of trainable values.
    std::size_t parameter_count() const;
};

/// Trainable weights plus the config they were built for.
struct DenoiserParams {
    ArchitectureConfig arch;
    ParamSet set;
};

/// He-style init: conv kernels N(0, 2/fan_in), biases zero, fusion and
/// other projection matrices N(0, 1/fan_in).
DenoiserParams init_params(const ArchitectureConfig& arch, SeededRng& rng);

/// eps prediction, same dims as x_t.
Image denoiser_forward(const DenoiserParams& params, const Image& x_t, int t,
                       const ConditioningEmbedding& z_y, const WaveletPyramid& f);

/// Forward pass with the tape retained so one backward sweep can follow.
/// Used by the trainer to avoid recomputing the forward pass.
class DenoiserEval {
  public:
    DenoiserEval(const DenoiserParams& params, const Image& x_t, int t,
                 const ConditioningEmbedding& z_y, const WaveletPyramid& f);

    const Image& output() const { return output_; }

    /// Reverse-mode gradients of sum(output * upstream) for every
    /// parameter block, shaped exactly like params.set.
    ParamSet backward(const Image& upstream);

  private:
    std::unique_ptr<Tape> tape_;
    std::vector<Tape::Var> param_vars_;
    Tape::Var out_var_;
    Image output_;
    const DenoiserParams* params_;
};

/// Exact reverse-mode gradients of forward contracted with upstream_grad.
/// Pure function: re-runs the forward pass internally.
ParamSet denoiser_backward(const DenoiserParams& params, const Image& x_t, int t,
                           const ConditioningEmbedding& z_y, const WaveletPyramid& f,
                           const Image& upstream_grad);

/// Adam moments; shapes mirror the parameter set.
struct AdamState {
    ParamSet m;
    ParamSet v;
    long step = 0;
};

AdamState make_adam_state(const DenoiserParams& params);

/// One bias-corrected Adam update, in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps_hat);

} // namespace awdiff
