#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awdiff/denoiser.hpp"
#include "awdiff/image.hpp"

namespace awdiff {

/// beta/alpha/alpha_bar tables for a T-step forward process.
/// Invariants: betas nondecreasing in (0,1); alpha_bars strictly decreasing
/// with alpha_bar[t] = alpha_bar[t-1] * alpha[t] exactly.
struct NoiseSchedule {
    int steps = 0;               // T
    std::vector<double> betas;      // beta_t, index t-1
    std::vector<double> alphas;     // 1 - beta_t
    std::vector<double> alpha_bars; // prod_{s<=t} alpha_s

    double beta(int t) const { return betas.at(t - 1); }
    double alpha(int t) const { return alphas.at(t - 1); }
    double alpha_bar(int t) const { return alpha_bars.at(t - 1); }
    /// alpha_bar_0 is defined as 1 (empty product).
    double alpha_bar_prev(int t) const { return t > 1 ? alpha_bars.at(t - 2) : 1.0; }

    void require_step(int t) const;

    /// Text table "t,beta,alpha,alpha_bar" with full double precision,
    /// one row per step. Used for golden-file testing.
    std::string dump_table() const;
};

NoiseSchedule linear_beta_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02);

enum class VarianceMode { Beta, BetaTilde };

struct SamplerConfig {
    std::uint64_t seed = 0;
    VarianceMode variance_mode = VarianceMode::Beta;
};

/// One forward kernel application: sqrt(1-beta_t) x_prev + sqrt(beta_t) eps.
Image forward_step(const Image& x_prev, int t, const NoiseSchedule& sched, SeededRng& rng);

/// Closed-form marginal: sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
Image forward_marginal(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched);

/// Inverts the marginal given a noise estimate:
/// (x_t - sqrt(1-ab_t) eps_pred) / sqrt(ab_t).
Image predict_x0(const Image& x_t, int t, const Image& eps_pred, const NoiseSchedule& sched);

/// Posterior step under the eps parameterization. No noise is added at t=1.
Image reverse_step(const Image& x_t, int t, const Image& eps_pred, const NoiseSchedule& sched,
                   const SamplerConfig& cfg, SeededRng& rng);

/// Full conditional sampling loop: x_T ~ N(0,I) from cfg.seed, then
/// T reverse steps with the denoiser conditioned on z_y and the wavelet
/// features f of the designated reference image. RNG order per trajectory:
/// the x_T field first, then one noise field per step t = T..2.
Image sample(const DenoiserParams& denoiser, const NoiseSchedule& sched,
             const ConditioningEmbedding& z_y, const WaveletPyramid& f, const SamplerConfig& cfg);

} // namespace awdiff
